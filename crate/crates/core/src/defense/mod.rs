//! Aggregation rules. Every rule sees only `(client_id, params)` pairs; the
//! harness's ground-truth labels never cross this boundary.

mod dp;
mod fld;
mod foolsgold;
mod krum;
mod robust;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::ClientId;
use crate::error::{Error, Result};
use crate::model::LayeredParams;
use crate::outlier::PointSet;

pub use dp::{dp_defense, DifferentialPrivacy};
pub use fld::{anomaly_detection, fld_aggregate, layer_scoring, score_layers, AnomalyReport, Fld};
pub use foolsgold::{foolsgold_weights, FoolsGold};
pub use krum::{bulyan, bulyan_select, krum, krum_scores, Bulyan, Krum};
pub use robust::{rfa, trimmed_mean_defense, Rfa, TrimmedMean};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub client_id: ClientId,
    pub params: LayeredParams,
}

/// `n x total` COF scores, row `i` belonging to `clients[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerScoreMatrix {
    pub clients: Vec<ClientId>,
    pub scores: Vec<Vec<f64>>,
}

impl LayerScoreMatrix {
    pub fn n(&self) -> usize {
        self.scores.len()
    }

    pub fn total(&self) -> usize {
        self.scores.first().map_or(0, Vec::len)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.scores.iter().map(|row| row[j]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefenseOutcome {
    pub benign_set: BTreeSet<ClientId>,
    pub aggregated: LayeredParams,
    /// Flagged-layer count per submission, in submission order (FLD only).
    pub per_client_flags: Vec<usize>,
    pub score_matrix: Option<LayerScoreMatrix>,
}

impl DefenseOutcome {
    fn keep_all(submissions: &[Submission], aggregated: LayeredParams) -> Self {
        DefenseOutcome {
            benign_set: submissions.iter().map(|s| s.client_id).collect(),
            aggregated,
            per_client_flags: Vec::new(),
            score_matrix: None,
        }
    }
}

/// A server-side aggregation rule. Stateful rules (FoolsGold) keep their
/// history inside the value, which the harness owns.
pub trait Defense: Send {
    fn name(&self) -> &'static str;

    fn aggregate(
        &mut self,
        submissions: &[Submission],
        global: &LayeredParams,
    ) -> Result<DefenseOutcome>;
}

/// Plain equal-weight averaging.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoDefense;

impl Defense for NoDefense {
    fn name(&self) -> &'static str {
        "none"
    }

    fn aggregate(
        &mut self,
        submissions: &[Submission],
        _global: &LayeredParams,
    ) -> Result<DefenseOutcome> {
        let mean = LayeredParams::mean(submissions.iter().map(|s| &s.params))?;
        Ok(DefenseOutcome::keep_all(submissions, mean))
    }
}

pub(crate) fn check_submissions(submissions: &[Submission]) -> Result<()> {
    let first = submissions.first().ok_or(Error::Empty("no submissions"))?;
    for s in &submissions[1..] {
        first.params.check_congruent(&s.params)?;
    }
    Ok(())
}

pub(crate) fn flat_points(submissions: &[Submission]) -> Result<PointSet> {
    PointSet::new(submissions.iter().map(|s| s.params.flatten()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefenseName {
    None,
    Fld,
    Krum,
    Bulyan,
    Rfa,
    TrimmedMean,
    FoolsGold,
    Dp,
}

/// `[defense]` section of the experiment config. Unset knobs take the
/// per-rule defaults (FLD mu = 3, COF k = n - 1, Krum f = ceil(n/4),
/// Bulyan f = floor((n-3)/4), trimming k = floor(n/5)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefenseConfig {
    pub name: DefenseName,
    pub mu: Option<f64>,
    pub cof_k: Option<usize>,
    pub f: Option<usize>,
    pub k_trim: Option<usize>,
    pub clip_norm: Option<f64>,
    pub sigma: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

impl DefenseConfig {
    pub fn named(name: DefenseName) -> Self {
        DefenseConfig {
            name,
            mu: None,
            cof_k: None,
            f: None,
            k_trim: None,
            clip_norm: None,
            sigma: None,
            tol: None,
            max_iter: None,
        }
    }

    pub fn build(&self, seed: u64) -> Result<Box<dyn Defense>> {
        Ok(match self.name {
            DefenseName::None => Box::new(NoDefense),
            DefenseName::Fld => {
                let mu = self.mu.unwrap_or(3.0);
                if !(mu > 0.0) {
                    return Err(Error::Config(format!("defense.mu must be > 0, got {mu}")));
                }
                Box::new(Fld {
                    mu,
                    cof_k: self.cof_k,
                })
            }
            DefenseName::Krum => Box::new(Krum { f: self.f }),
            DefenseName::Bulyan => Box::new(Bulyan { f: self.f }),
            DefenseName::Rfa => Box::new(Rfa {
                tol: self.tol.unwrap_or(1e-7),
                max_iter: self.max_iter.unwrap_or(1000),
            }),
            DefenseName::TrimmedMean => Box::new(TrimmedMean {
                k_trim: self.k_trim,
            }),
            DefenseName::FoolsGold => Box::new(FoolsGold::default()),
            DefenseName::Dp => {
                let clip_norm = self.clip_norm.unwrap_or(1.0);
                let sigma = self.sigma.unwrap_or(0.01);
                if !(clip_norm > 0.0) || !(sigma >= 0.0) {
                    return Err(Error::Config(
                        "dp needs clip_norm > 0 and sigma >= 0".into(),
                    ));
                }
                Box::new(DifferentialPrivacy::new(clip_norm, sigma, seed))
            }
        })
    }
}
