use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n x d` matrix of finite reals, one point per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct PointSet {
    rows: Vec<Vec<f64>>,
}

impl PointSet {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.first().ok_or(Error::Empty("point set"))?.len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::Shape(format!(
                    "point {i} has dimension {}, expected {d}",
                    r.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Shape(format!(
                    "point {i} has a non-finite coordinate"
                )));
            }
        }
        Ok(PointSet { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    /// Coordinate-wise mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim()];
        for r in &self.rows {
            for (a, v) in acc.iter_mut().zip(r) {
                *a += v;
            }
        }
        let inv = 1.0 / self.len() as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
        acc
    }
}

impl TryFrom<Vec<Vec<f64>>> for PointSet {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        PointSet::new(rows)
    }
}

impl From<PointSet> for Vec<Vec<f64>> {
    fn from(p: PointSet) -> Self {
        p.rows
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Symmetric matrix of pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn euclidean(points: &PointSet) -> Self {
        Self::from_fn(points.len(), |i, j| euclidean(points.row(i), points.row(j)))
    }

    /// Distances between fixed-point rows, computed from exact integer
    /// differences. Any two point sets whose rows differ by a common offset
    /// yield bit-identical matrices.
    pub fn fixed_point(rows: &[Vec<i128>], scale: f64) -> Self {
        let inv = 1.0 / scale;
        Self::from_fn(rows.len(), |i, j| {
            rows[i]
                .iter()
                .zip(&rows[j])
                .map(|(a, b)| {
                    let diff = (a - b) as f64 * inv;
                    diff * diff
                })
                .sum::<f64>()
                .sqrt()
        })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        DistanceMatrix { n, d }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }
}
