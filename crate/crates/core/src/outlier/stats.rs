use crate::error::{Error, Result};
use crate::outlier::PointSet;

/// Median; the mean of the two middle values for even lengths.
pub fn median(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::Empty("median of an empty vector"));
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Ok(if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    })
}

/// Returns `(median, MAD)` where MAD is the median of absolute deviations from
/// the median (unscaled).
pub fn median_absolute_deviation(v: &[f64]) -> Result<(f64, f64)> {
    let me = median(v)?;
    let dev: Vec<f64> = v.iter().map(|x| (x - me).abs()).collect();
    Ok((me, median(&dev)?))
}

/// Two-tailed MAD rule: `score >= Me + mu*MAD` or `score <= Me - mu*MAD`.
/// A zero MAD flags nothing. `mu` is expected to be positive.
pub fn mad_flags(scores: &[f64], mu: f64) -> Vec<bool> {
    let Ok((me, mad)) = median_absolute_deviation(scores) else {
        return Vec::new();
    };
    if mad == 0.0 {
        return vec![false; scores.len()];
    }
    let upper = me + mu * mad;
    let lower = me - mu * mad;
    scores.iter().map(|&s| s >= upper || s <= lower).collect()
}

/// Per coordinate: sort, drop `k_trim` values from each end, average the rest.
pub fn trimmed_mean_coord(points: &PointSet, k_trim: usize) -> Result<Vec<f64>> {
    let n = points.len();
    if n < 2 * k_trim + 1 {
        return Err(Error::OverTrim { k: k_trim, n });
    }
    let keep = n - 2 * k_trim;
    let mut column = vec![0.0; n];
    Ok((0..points.dim())
        .map(|j| {
            for (c, row) in column.iter_mut().zip(points.rows()) {
                *c = row[j];
            }
            column.sort_by(f64::total_cmp);
            column[k_trim..k_trim + keep].iter().sum::<f64>() / keep as f64
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[1.0, 3.0, 2.0]).unwrap(), 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 2.5);
        assert_eq!(median(&[5.0]).unwrap(), 5.0);
        assert!(median(&[]).is_err());
    }

    #[test]
    fn hand_computed_mad_example() {
        let s = [1.0, 1.1, 0.9, 1.2, 0.8, 1.05, 0.95, 1.15, 0.85, 9.0];
        let (me, mad) = median_absolute_deviation(&s).unwrap();
        assert!((me - 1.025).abs() < 1e-12);
        assert!((mad - 0.125).abs() < 1e-12);
        let flags = mad_flags(&s, 3.0);
        assert_eq!(
            flags,
            [false, false, false, false, false, false, false, false, false, true]
        );
    }

    #[test]
    fn zero_mad_flags_nothing() {
        let mut s = vec![1.0; 9];
        s.push(100.0);
        assert_eq!(mad_flags(&s, 3.0), vec![false; 10]);
    }

    #[test]
    fn single_score_not_flagged() {
        assert_eq!(mad_flags(&[4.2], 3.0), vec![false]);
    }

    #[test]
    fn low_tail_is_flagged_too() {
        let s = [1.0, 1.1, 0.9, 1.2, 0.8, 1.05, 0.95, 1.15, 0.85, -5.0];
        assert!(mad_flags(&s, 3.0)[9]);
    }

    #[test]
    fn trimmed_means() {
        let col = |v: &[f64]| PointSet::new(v.iter().map(|&x| vec![x]).collect()).unwrap();
        assert_eq!(
            trimmed_mean_coord(&col(&[5.0, 1.0, 4.0, 2.0, 3.0]), 1).unwrap(),
            vec![3.0]
        );
        assert_eq!(
            trimmed_mean_coord(&col(&[1.0, 2.0, 6.0]), 0).unwrap(),
            vec![3.0]
        );
        assert_eq!(
            trimmed_mean_coord(&col(&[10.0, 1.0, 7.0]), 1).unwrap(),
            vec![7.0]
        );
        assert!(matches!(
            trimmed_mean_coord(&col(&[1.0, 2.0]), 1),
            Err(Error::OverTrim { .. })
        ));
    }
}
