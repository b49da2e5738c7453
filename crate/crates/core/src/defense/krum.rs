use crate::defense::{check_submissions, flat_points, Defense, DefenseOutcome, Submission};
use crate::error::{Error, Result};
use crate::model::LayeredParams;
use crate::outlier::{median, squared_euclidean, PointSet};

/// Sum of squared distances from each point to its `neighbours` nearest peers.
fn scores_with(points: &[&[f64]], neighbours: usize) -> Vec<f64> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| squared_euclidean(points[i], points[j]))
                .collect();
            d.sort_by(f64::total_cmp);
            d.iter().take(neighbours).sum()
        })
        .collect()
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// Krum scores with `n - f - 2` neighbours.
pub fn krum_scores(points: &PointSet, f: usize) -> Result<Vec<f64>> {
    let n = points.len();
    if n < 2 * f + 3 {
        return Err(Error::TooFewClients {
            rule: "krum",
            n,
            f,
            required: 2 * f + 3,
        });
    }
    let rows: Vec<&[f64]> = points.rows().iter().map(Vec::as_slice).collect();
    Ok(scores_with(&rows, n - f - 2))
}

fn default_krum_f(n: usize) -> usize {
    n.div_ceil(4)
}

fn default_bulyan_f(n: usize) -> usize {
    n.saturating_sub(3) / 4
}

/// Selects the single submission with the lowest Krum score (ties to the
/// lower index).
pub fn krum(submissions: &[Submission], f: usize) -> Result<DefenseOutcome> {
    check_submissions(submissions)?;
    let scores = krum_scores(&flat_points(submissions)?, f)?;
    let chosen = &submissions[argmin(&scores)];
    Ok(DefenseOutcome {
        benign_set: [chosen.client_id].into(),
        aggregated: chosen.params.clone(),
        per_client_flags: Vec::new(),
        score_matrix: None,
    })
}

/// Indices of the `n - 2f` models chosen by repeated Krum without replacement.
/// Once the remaining pool is small the neighbour count is clamped to
/// `[1, |pool| - 1]`.
pub fn bulyan_select(points: &PointSet, f: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if n < 4 * f + 3 {
        return Err(Error::TooFewClients {
            rule: "bulyan",
            n,
            f,
            required: 4 * f + 3,
        });
    }
    let theta = n - 2 * f;
    let mut pool: Vec<usize> = (0..n).collect();
    let mut selected = Vec::with_capacity(theta);
    while selected.len() < theta {
        let pick = if pool.len() == 1 {
            0
        } else {
            let rows: Vec<&[f64]> = pool.iter().map(|&i| points.row(i)).collect();
            let m = pool.len().saturating_sub(f + 2).clamp(1, pool.len() - 1);
            argmin(&scores_with(&rows, m))
        };
        selected.push(pool.remove(pick));
    }
    Ok(selected)
}

/// Bulyan: Krum-based selection of `theta = n - 2f` models, then per
/// coordinate the mean of the `theta - 2f` values closest to the median.
pub fn bulyan(submissions: &[Submission], f: usize) -> Result<DefenseOutcome> {
    check_submissions(submissions)?;
    let points = flat_points(submissions)?;
    let selected = bulyan_select(&points, f)?;
    let beta = selected.len() - 2 * f;
    let mut out = vec![0.0; points.dim()];
    let mut column: Vec<f64> = vec![0.0; selected.len()];
    for (j, o) in out.iter_mut().enumerate() {
        for (c, &i) in column.iter_mut().zip(&selected) {
            *c = points.row(i)[j];
        }
        let med = median(&column)?;
        let mut order: Vec<usize> = (0..column.len()).collect();
        order.sort_by(|&a, &b| {
            (column[a] - med)
                .abs()
                .total_cmp(&(column[b] - med).abs())
                .then(a.cmp(&b))
        });
        *o = order[..beta].iter().map(|&a| column[a]).sum::<f64>() / beta as f64;
    }
    Ok(DefenseOutcome {
        benign_set: selected.iter().map(|&i| submissions[i].client_id).collect(),
        aggregated: submissions[0].params.with_flat(&out)?,
        per_client_flags: Vec::new(),
        score_matrix: None,
    })
}

#[derive(Debug, Clone, Default)]
pub struct Krum {
    pub f: Option<usize>,
}

impl Defense for Krum {
    fn name(&self) -> &'static str {
        "krum"
    }

    fn aggregate(
        &mut self,
        submissions: &[Submission],
        _global: &LayeredParams,
    ) -> Result<DefenseOutcome> {
        krum(
            submissions,
            self.f.unwrap_or_else(|| default_krum_f(submissions.len())),
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct Bulyan {
    pub f: Option<usize>,
}

impl Defense for Bulyan {
    fn name(&self) -> &'static str {
        "bulyan"
    }

    fn aggregate(
        &mut self,
        submissions: &[Submission],
        _global: &LayeredParams,
    ) -> Result<DefenseOutcome> {
        bulyan(
            submissions,
            self.f
                .unwrap_or_else(|| default_bulyan_f(submissions.len())),
        )
    }
}
