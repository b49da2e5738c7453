//! Connectivity-based outlier factors on a small 2-D cloud, then MAD flagging
//! of the scores.

use fedsieve::outlier::{cof, mad_flags, PointSet};

fn main() -> fedsieve::Result<()> {
    let mut rows: Vec<Vec<f64>> = (0..8)
        .map(|i| {
            let t = f64::from(i) * 2.399;
            vec![0.1 * t.cos() * (1.0 + 0.1 * f64::from(i)), 0.1 * t.sin()]
        })
        .collect();
    rows.push(vec![2.0, 2.0]);
    rows.push(vec![0.15, -1.5]);
    let points = PointSet::new(rows)?;
    let k = points.len() - 1;
    let scores = cof(&points, k)?;
    let flags = mad_flags(&scores, 3.0);
    println!("k = {k}");
    for (i, (s, f)) in scores.iter().zip(&flags).enumerate() {
        println!(
            "point {i:>2} ({:>6.3}, {:>6.3}): COF {s:.4}{}",
            points.row(i)[0],
            points.row(i)[1],
            if *f { "  <- flagged" } else { "" }
        );
    }
    Ok(())
}
