use crate::defense::{check_submissions, flat_points, Defense, DefenseOutcome, Submission};
use crate::error::Result;
use crate::model::LayeredParams;
use crate::outlier::{geometric_median, trimmed_mean_coord};

/// Robust federated aggregation: geometric median of the flattened models.
pub fn rfa(submissions: &[Submission], tol: f64, max_iter: usize) -> Result<DefenseOutcome> {
    check_submissions(submissions)?;
    let gm = geometric_median(&flat_points(submissions)?, tol, max_iter);
    Ok(DefenseOutcome::keep_all(
        submissions,
        submissions[0].params.with_flat(&gm)?,
    ))
}

/// Coordinate-wise trimmed mean with `k_trim` values cut from each end.
pub fn trimmed_mean_defense(submissions: &[Submission], k_trim: usize) -> Result<DefenseOutcome> {
    check_submissions(submissions)?;
    let tm = trimmed_mean_coord(&flat_points(submissions)?, k_trim)?;
    Ok(DefenseOutcome::keep_all(
        submissions,
        submissions[0].params.with_flat(&tm)?,
    ))
}

#[derive(Debug, Clone)]
pub struct Rfa {
    pub tol: f64,
    pub max_iter: usize,
}

impl Defense for Rfa {
    fn name(&self) -> &'static str {
        "rfa"
    }

    fn aggregate(
        &mut self,
        submissions: &[Submission],
        _global: &LayeredParams,
    ) -> Result<DefenseOutcome> {
        rfa(submissions, self.tol, self.max_iter)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrimmedMean {
    pub k_trim: Option<usize>,
}

impl Defense for TrimmedMean {
    fn name(&self) -> &'static str {
        "trimmed_mean"
    }

    fn aggregate(
        &mut self,
        submissions: &[Submission],
        _global: &LayeredParams,
    ) -> Result<DefenseOutcome> {
        trimmed_mean_defense(submissions, self.k_trim.unwrap_or(submissions.len() / 5))
    }
}
