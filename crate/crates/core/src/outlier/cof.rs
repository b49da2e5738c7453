//! Connectivity-based outlier factor.
//!
//! For a point `p` with k-nearest neighbourhood `N_k(p)`, the set-based
//! nearest path starts at `p` and repeatedly appends the point of `N_k(p)`
//! closest to the already chosen set; `e_i` is that closest distance. The
//! average chaining distance weights early edges more:
//!
//! ```text
//! ac(p)  = sum_{i=1..k} 2 (k + 1 - i) / (k (k + 1)) * e_i
//! COF(p) = k * ac(p) / sum_{o in N_k(p)} ac(o)
//! ```
//!
//! Ties in neighbour ranking and path extension go to the lowest index.

use crate::error::{Error, Result};
use crate::outlier::{DistanceMatrix, PointSet};

/// Score for a point whose neighbours all have zero chaining distance while
/// its own is positive (only reachable with k < n - 1 and duplicate points).
pub const UNBOUNDED_SCORE: f64 = f64::MAX;

pub fn cof(points: &PointSet, k: usize) -> Result<Vec<f64>> {
    if points.len() < 3 {
        return Err(Error::InsufficientPoints(points.len()));
    }
    cof_from_distances(&DistanceMatrix::euclidean(points), k)
}

/// Nearest `k` other points of `p`, ordered by (distance, index).
pub fn nearest_neighbours(dist: &DistanceMatrix, p: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<usize> = (0..dist.len()).filter(|&o| o != p).collect();
    others.sort_by(|&a, &b| dist.get(p, a).total_cmp(&dist.get(p, b)).then(a.cmp(&b)));
    others.truncate(k);
    others
}

fn chaining_distance(dist: &DistanceMatrix, p: usize, neighbours: &[usize]) -> f64 {
    let k = neighbours.len();
    let norm = (k * (k + 1)) as f64;
    // closest distance from each remaining neighbour to the chosen set
    let mut reach: Vec<f64> = neighbours.iter().map(|&o| dist.get(p, o)).collect();
    let mut taken = vec![false; k];
    let mut ac = 0.0;
    for i in 1..=k {
        let mut best: Option<usize> = None;
        for c in 0..k {
            if taken[c] {
                continue;
            }
            best = match best {
                None => Some(c),
                Some(b) => {
                    let closer = reach[c] < reach[b];
                    let tie_lower = reach[c] == reach[b] && neighbours[c] < neighbours[b];
                    if closer || tie_lower {
                        Some(c)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        let c = best.expect("k candidates for k steps");
        taken[c] = true;
        ac += 2.0 * (k + 1 - i) as f64 / norm * reach[c];
        let added = neighbours[c];
        for o in 0..k {
            if !taken[o] {
                reach[o] = reach[o].min(dist.get(added, neighbours[o]));
            }
        }
    }
    ac
}

/// COF over a precomputed distance matrix.
pub fn cof_from_distances(dist: &DistanceMatrix, k: usize) -> Result<Vec<f64>> {
    let n = dist.len();
    if n < 3 {
        return Err(Error::InsufficientPoints(n));
    }
    if k < 2 || k > n - 1 {
        return Err(Error::InvalidNeighbourhood { k, n });
    }
    let neighbourhoods: Vec<Vec<usize>> = (0..n).map(|p| nearest_neighbours(dist, p, k)).collect();
    let ac: Vec<f64> = (0..n)
        .map(|p| chaining_distance(dist, p, &neighbourhoods[p]))
        .collect();
    Ok((0..n)
        .map(|p| {
            let denom: f64 = neighbourhoods[p].iter().map(|&o| ac[o]).sum();
            if denom > 0.0 {
                k as f64 * ac[p] / denom
            } else if ac[p] == 0.0 {
                1.0
            } else {
                UNBOUNDED_SCORE
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(rows: &[&[f64]]) -> PointSet {
        PointSet::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn far_point_scores_highest() {
        let p = pts(&[
            &[0.0, 0.0],
            &[0.1, 0.0],
            &[0.0, 0.1],
            &[0.1, 0.1],
            &[0.05, 0.05],
            &[0.02, 0.08],
            &[0.08, 0.03],
            &[5.0, 5.0],
        ]);
        let s = cof(&p, 7).unwrap();
        let max = s.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(s[7], max);
        assert!(s[..7].iter().all(|&v| v < s[7]));
    }

    #[test]
    fn identical_points_score_one() {
        let p = pts(&[&[1.0, 2.0][..]; 6]);
        assert_eq!(cof(&p, 5).unwrap(), vec![1.0; 6]);
        assert_eq!(cof(&p, 2).unwrap(), vec![1.0; 6]);
    }

    #[test]
    fn too_few_points() {
        let p = pts(&[&[0.0], &[1.0]]);
        assert!(matches!(cof(&p, 1), Err(Error::InsufficientPoints(2))));
        let p3 = pts(&[&[0.0], &[1.0], &[3.0]]);
        assert!(matches!(
            cof(&p3, 3),
            Err(Error::InvalidNeighbourhood { .. })
        ));
        assert!(matches!(
            cof(&p3, 1),
            Err(Error::InvalidNeighbourhood { .. })
        ));
    }

    #[test]
    fn hand_computed_line() {
        // Points 0, 1, 3 on a line with k = 2.
        // ac(0): path 0->1 (1), then 3 (2): (2*2/6)*1 + (2*1/6)*2 = 4/3
        // ac(1): path 1->0 (1, tie with nothing), then 3 (2 from 1): same 4/3
        // ac(3): path 3->1 (2), then 0 (1): (4/6)*2 + (2/6)*1 = 5/3
        let p = pts(&[&[0.0], &[1.0], &[3.0]]);
        let s = cof(&p, 2).unwrap();
        let ac = [4.0 / 3.0, 4.0 / 3.0, 5.0 / 3.0];
        assert!((s[0] - 2.0 * ac[0] / (ac[1] + ac[2])).abs() < 1e-15);
        assert!((s[2] - 2.0 * ac[2] / (ac[0] + ac[1])).abs() < 1e-15);
    }

    #[test]
    fn duplicates_with_small_k_are_unbounded() {
        let p = pts(&[&[0.0], &[0.0], &[0.0], &[0.0], &[9.0]]);
        let s = cof(&p, 2).unwrap();
        assert_eq!(&s[..4], &[1.0; 4]);
        assert_eq!(s[4], UNBOUNDED_SCORE);
    }
}
