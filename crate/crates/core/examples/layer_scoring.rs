//! Layer-wise scoring of ten submissions where two clients tamper with
//! a subset of layers, followed by the FLD benign-set decision.

use fedsieve::defense::{fld_aggregate, Submission};
use fedsieve::model::{init_model, ArchSpec};
use fedsieve::seed;
use rand_distr::{Distribution, Normal};

fn main() -> fedsieve::Result<()> {
    let base = init_model(&ArchSpec::mlp(6, 4, 3), 1)?;
    let jitter = Normal::new(0.0, 0.02).expect("valid");
    let mut rng = seed::rng(7, &[]);
    let subs: Vec<Submission> = (0..10)
        .map(|i| {
            let mut p = base.clone();
            for layer in p.layers_mut() {
                for v in layer.values.iter_mut() {
                    *v += jitter.sample(&mut rng);
                }
            }
            // client 8 tampers with both weight matrices, client 9 with one bias
            let touched: &[usize] = match i {
                8 => &[0, 2],
                9 => &[3],
                _ => &[],
            };
            for &j in touched {
                p.layers_mut()[j].values.iter_mut().for_each(|v| *v += 0.5);
            }
            Ok(Submission {
                client_id: i,
                params: p,
            })
        })
        .collect::<fedsieve::Result<_>>()?;

    let out = fld_aggregate(&subs, 3.0, None)?;
    let matrix = out.score_matrix.as_ref().expect("fld reports scores");
    let names: Vec<&str> = base.layers().iter().map(|l| l.name.as_str()).collect();
    println!(
        "client  {}  flags",
        names.iter().map(|n| format!("{n:>11}")).collect::<String>()
    );
    for (i, row) in matrix.scores.iter().enumerate() {
        let cells: String = row.iter().map(|s| format!("{s:>11.3}")).collect();
        println!(
            "{:>6}  {cells}  {}",
            matrix.clients[i], out.per_client_flags[i]
        );
    }
    println!("benign set: {:?}", out.benign_set);
    Ok(())
}
