//! Slow reference implementations used to cross-check the library: every
//! quantity is recomputed from raw coordinates by exhaustive scans, sharing
//! no code with the production paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s.sqrt()
}

fn check(points: &[Vec<f64>]) -> Result<usize> {
    let d = points.first().ok_or(Error::Empty("oracle input"))?.len();
    if points
        .iter()
        .any(|p| p.len() != d || p.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::Shape(
            "oracle input must be a finite rectangular matrix".into(),
        ));
    }
    Ok(d)
}

/// COF by brute force. Neighbourhoods come from a full sort of all other
/// points on (distance, index); each path step scans every (chosen,
/// candidate) pair for the globally shortest link.
pub fn cof_oracle(points: &[Vec<f64>], k: usize) -> Result<Vec<f64>> {
    check(points)?;
    let n = points.len();
    if n < 3 {
        return Err(Error::InsufficientPoints(n));
    }
    if k < 2 || k > n - 1 {
        return Err(Error::InvalidNeighbourhood { k, n });
    }
    let knn = |p: usize| -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = (0..n)
            .filter(|&o| o != p)
            .map(|o| (dist(&points[p], &points[o]), o))
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|(_, o)| o).collect()
    };
    let ac = |p: usize, nb: &[usize]| -> f64 {
        let mut chosen = vec![p];
        let mut rest: Vec<usize> = nb.to_vec();
        let mut total = 0.0;
        for i in 1..=k {
            let mut best: Option<(f64, usize)> = None;
            for &c in &rest {
                for &s in &chosen {
                    let d = dist(&points[s], &points[c]);
                    best = match best {
                        Some((bd, bc)) if bd < d || (bd == d && bc <= c) => Some((bd, bc)),
                        _ => Some((d, c)),
                    };
                }
            }
            let (d, c) = best.expect("candidates remain");
            total += 2.0 * (k + 1 - i) as f64 / (k * (k + 1)) as f64 * d;
            chosen.push(c);
            rest.retain(|&r| r != c);
        }
        total
    };
    let neighbourhoods: Vec<Vec<usize>> = (0..n).map(knn).collect();
    let acs: Vec<f64> = (0..n).map(|p| ac(p, &neighbourhoods[p])).collect();
    Ok((0..n)
        .map(|p| {
            let denom: f64 = neighbourhoods[p].iter().map(|&o| acs[o]).sum();
            if denom > 0.0 {
                k as f64 * acs[p] / denom
            } else if acs[p] == 0.0 {
                1.0
            } else {
                f64::MAX
            }
        })
        .collect())
}

fn subsets(n: usize, r: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == r {
            f(cur);
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, f);
            cur.pop();
        }
    }
    rec(0, n, r, &mut Vec::new(), f);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrumOracle {
    pub scores: Vec<f64>,
    pub selected: usize,
}

/// Krum by enumeration: each score is the minimum, over every subset of
/// `n - f - 2` other points, of the summed squared distances.
pub fn krum_oracle(points: &[Vec<f64>], f: usize) -> Result<KrumOracle> {
    check(points)?;
    let n = points.len();
    if n < 2 * f + 3 {
        return Err(Error::TooFewClients {
            rule: "krum",
            n,
            f,
            required: 2 * f + 3,
        });
    }
    let m = n - f - 2;
    let scores: Vec<f64> = (0..n)
        .map(|i| {
            let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let mut best = f64::INFINITY;
            subsets(others.len(), m, &mut |idx| {
                let s: f64 = idx
                    .iter()
                    .map(|&t| dist(&points[i], &points[others[t]]).powi(2))
                    .sum();
                best = best.min(s);
            });
            best
        })
        .collect();
    let selected = (0..n).fold(0, |b, i| if scores[i] < scores[b] { i } else { b });
    Ok(KrumOracle { scores, selected })
}

pub fn distance_sum_oracle(points: &[Vec<f64>], z: &[f64]) -> f64 {
    points.iter().map(|p| dist(p, z)).sum()
}

/// Geometric median by repeatedly refined grid search over the bounding
/// box. Meant for small dimension (each level evaluates `steps^d` points).
pub fn gm_oracle(points: &[Vec<f64>], steps: usize, levels: usize) -> Result<Vec<f64>> {
    let d = check(points)?;
    if d > 4 {
        return Err(Error::Shape(format!(
            "grid oracle supports d <= 4, got {d}"
        )));
    }
    let steps = steps.max(3);
    let mut lo: Vec<f64> = (0..d)
        .map(|j| points.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min))
        .collect();
    let mut hi: Vec<f64> = (0..d)
        .map(|j| {
            points
                .iter()
                .map(|p| p[j])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let mut best = points[0].clone();
    let mut best_val = distance_sum_oracle(points, &best);
    for _ in 0..levels {
        let total = steps.pow(d as u32);
        for code in 0..total {
            let mut c = code;
            let z: Vec<f64> = (0..d)
                .map(|j| {
                    let t = c % steps;
                    c /= steps;
                    lo[j] + (hi[j] - lo[j]) * t as f64 / (steps - 1) as f64
                })
                .collect();
            let v = distance_sum_oracle(points, &z);
            if v < best_val {
                best_val = v;
                best = z;
            }
        }
        for j in 0..d {
            let half = (hi[j] - lo[j]) * 2.0 / (steps - 1) as f64;
            lo[j] = best[j] - half;
            hi[j] = best[j] + half;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn krum_oracle_picks_cluster_member() {
        let mut pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 0.01, 0.0]).collect();
        pts.push(vec![50.0, 50.0]);
        let o = krum_oracle(&pts, 1).unwrap();
        assert!(o.selected < 6);
    }

    #[test]
    fn gm_oracle_square_centre() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![2.0, 0.0],
            vec![0.0, 2.0],
            vec![2.0, 2.0],
        ];
        let z = gm_oracle(&pts, 11, 20).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-6 && (z[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cof_oracle_identical_points() {
        let pts = vec![vec![1.0, 1.0]; 5];
        assert_eq!(cof_oracle(&pts, 4).unwrap(), vec![1.0; 5]);
    }
}
