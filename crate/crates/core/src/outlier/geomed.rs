use crate::outlier::{euclidean, PointSet};

/// Floor applied to distances in the Weiszfeld weights.
const SMOOTHING: f64 = 1e-9;

pub fn distance_sum(points: &PointSet, z: &[f64]) -> f64 {
    points.rows().iter().map(|r| euclidean(r, z)).sum()
}

/// Geometric median by Weiszfeld iteration from the coordinate-wise mean.
///
/// Stops when a step moves less than `tol` or after `max_iter` steps. The best
/// iterate is compared against every input point and the better of the two is
/// returned, so the result never loses to the mean or to any input.
pub fn geometric_median(points: &PointSet, tol: f64, max_iter: usize) -> Vec<f64> {
    let d = points.dim();
    let mut z = points.mean();
    let mut best_obj = distance_sum(points, &z);
    let mut best = z.clone();
    let mut next = vec![0.0; d];
    for _ in 0..max_iter {
        next.iter_mut().for_each(|v| *v = 0.0);
        let mut weight_sum = 0.0;
        for r in points.rows() {
            let w = 1.0 / euclidean(r, &z).max(SMOOTHING);
            weight_sum += w;
            for (n, x) in next.iter_mut().zip(r) {
                *n += w * x;
            }
        }
        next.iter_mut().for_each(|v| *v /= weight_sum);
        let step = euclidean(&next, &z);
        std::mem::swap(&mut z, &mut next);
        let obj = distance_sum(points, &z);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&z);
        }
        if step < tol {
            break;
        }
    }
    for r in points.rows() {
        let obj = distance_sum(points, r);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(r);
        }
    }
    best
}
