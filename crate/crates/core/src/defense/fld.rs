use crate::defense::{check_submissions, Defense, DefenseOutcome, LayerScoreMatrix, Submission};
use crate::error::{Error, Result};
use crate::model::LayeredParams;
use crate::outlier::{cof_from_distances, mad_flags, DistanceMatrix, PointSet};

/// Layer Scoring over arbitrary per-layer distance matrices.
///
/// `distances(j)` yields the client-by-client distances of layer `j`; COF
/// runs on each layer independently with neighbourhood `k` (default n - 1).
pub fn score_layers(
    n: usize,
    total: usize,
    k: Option<usize>,
    mut distances: impl FnMut(usize) -> Result<DistanceMatrix>,
) -> Result<Vec<Vec<f64>>> {
    if n < 3 {
        return Err(Error::InsufficientPoints(n));
    }
    let k = k.unwrap_or(n - 1);
    let mut scores = vec![vec![0.0; total]; n];
    for j in 0..total {
        let column = distances(j)
            .and_then(|d| cof_from_distances(&d, k))
            .map_err(|e| e.in_layer(j))?;
        for (row, s) in scores.iter_mut().zip(column) {
            row[j] = s;
        }
    }
    Ok(scores)
}

/// COF score of every client's every layer.
pub fn layer_scoring(submissions: &[Submission], k: Option<usize>) -> Result<LayerScoreMatrix> {
    if submissions.len() < 3 {
        return Err(Error::InsufficientPoints(submissions.len()));
    }
    check_submissions(submissions)?;
    let total = submissions[0].params.total();
    let scores = score_layers(submissions.len(), total, k, |j| {
        let rows = submissions
            .iter()
            .map(|s| s.params.layer(j).values.clone())
            .collect();
        Ok(DistanceMatrix::euclidean(&PointSet::new(rows)?))
    })?;
    Ok(LayerScoreMatrix {
        clients: submissions.iter().map(|s| s.client_id).collect(),
        scores,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnomalyReport {
    /// Row indices (into the score matrix) judged benign, ascending.
    pub benign: Vec<usize>,
    /// Number of flagged layers per row.
    pub flags: Vec<usize>,
    /// True when no row passed the threshold and the lowest-flag half was kept.
    pub fallback: bool,
}

/// Per layer, MAD-flags outlying scores in both tails; a client is benign iff
/// its flag count is strictly below `total / 2`. If nobody passes, the
/// `ceil(n/2)` clients with the fewest flags are kept (ties to lower index).
pub fn anomaly_detection(scores: &LayerScoreMatrix, mu: f64) -> AnomalyReport {
    let n = scores.n();
    let total = scores.total();
    let mut flags = vec![0usize; n];
    for j in 0..total {
        for (f, flagged) in flags.iter_mut().zip(mad_flags(&scores.column(j), mu)) {
            *f += usize::from(flagged);
        }
    }
    // flags < total / 2, in integers
    let mut benign: Vec<usize> = (0..n).filter(|&i| 2 * flags[i] < total).collect();
    let fallback = benign.is_empty() && n > 0;
    if fallback {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (flags[i], i));
        order.truncate(n.div_ceil(2));
        order.sort_unstable();
        benign = order;
    }
    AnomalyReport {
        benign,
        flags,
        fallback,
    }
}

/// FLD: Layer Scoring, Anomaly Detection, then the equal-weight mean of the
/// benign submissions.
pub fn fld_aggregate(
    submissions: &[Submission],
    mu: f64,
    cof_k: Option<usize>,
) -> Result<DefenseOutcome> {
    let matrix = layer_scoring(submissions, cof_k)?;
    let report = anomaly_detection(&matrix, mu);
    let aggregated = LayeredParams::mean(report.benign.iter().map(|&i| &submissions[i].params))?;
    Ok(DefenseOutcome {
        benign_set: report
            .benign
            .iter()
            .map(|&i| submissions[i].client_id)
            .collect(),
        aggregated,
        per_client_flags: report.flags,
        score_matrix: Some(matrix),
    })
}

#[derive(Debug, Clone)]
pub struct Fld {
    pub mu: f64,
    pub cof_k: Option<usize>,
}

impl Default for Fld {
    fn default() -> Self {
        Fld {
            mu: 3.0,
            cof_k: None,
        }
    }
}

impl Defense for Fld {
    fn name(&self) -> &'static str {
        "fld"
    }

    fn aggregate(
        &mut self,
        submissions: &[Submission],
        _global: &LayeredParams,
    ) -> Result<DefenseOutcome> {
        fld_aggregate(submissions, self.mu, self.cof_k)
    }
}
