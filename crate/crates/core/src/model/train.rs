use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::DatasetShard;
use crate::error::{Error, Result};
use crate::model::mlp::MlpView;
use crate::model::{Gradient, LayeredParams};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    Constant {
        lr: f64,
    },
    /// `theta / (round + eps)`
    Decaying {
        theta: f64,
        eps: f64,
    },
}

impl LrSchedule {
    pub fn at(&self, round: usize) -> f64 {
        match *self {
            LrSchedule::Constant { lr } => lr,
            LrSchedule::Decaying { theta, eps } => theta / (round as f64 + eps),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            LrSchedule::Constant { lr } => lr > 0.0 && lr.is_finite(),
            LrSchedule::Decaying { theta, eps } => theta > 0.0 && eps > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid learning-rate schedule {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub local_epochs: usize,
    pub batch_size: usize,
    pub lr_schedule: LrSchedule,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            local_epochs: 2,
            batch_size: 16,
            lr_schedule: LrSchedule::Constant { lr: 0.1 },
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        self.lr_schedule.validate()
    }
}

/// A differentiable training objective over an indexable set of samples.
pub trait Objective {
    fn sample_count(&self) -> usize;

    /// Mean loss over `batch` and its gradient at `params`.
    fn loss_and_grad(&self, params: &LayeredParams, batch: &[usize]) -> Result<(f64, Gradient)>;

    fn full_loss(&self, params: &LayeredParams) -> Result<f64> {
        let all: Vec<usize> = (0..self.sample_count()).collect();
        Ok(self.loss_and_grad(params, &all)?.0)
    }
}

/// Cross-entropy of the MLP on a labelled shard.
pub struct Classification<'a> {
    pub shard: &'a DatasetShard,
}

impl Objective for Classification<'_> {
    fn sample_count(&self) -> usize {
        self.shard.len()
    }

    fn loss_and_grad(&self, params: &LayeredParams, batch: &[usize]) -> Result<(f64, Gradient)> {
        let view = MlpView::new(params)?;
        let mut grad = params.zeros_like();
        let loss = view.loss_and_grad(&self.shard.samples, batch, &mut grad);
        Ok((loss, grad))
    }
}

/// `0.5 * curvature * ||w - center||^2`, a single-sample strongly convex objective.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub center: LayeredParams,
    pub curvature: f64,
}

impl Quadratic {
    pub fn value(&self, params: &LayeredParams) -> f64 {
        0.5 * self.curvature * params.squared_distance(&self.center)
    }
}

impl Objective for Quadratic {
    fn sample_count(&self) -> usize {
        1
    }

    fn loss_and_grad(&self, params: &LayeredParams, _batch: &[usize]) -> Result<(f64, Gradient)> {
        params.check_congruent(&self.center)?;
        let mut grad = params.sub(&self.center);
        grad.scale(self.curvature);
        Ok((self.value(params), grad))
    }
}

/// `alpha * inner + (1 - alpha) * ||w - anchor||^2`: the evasion-constrained
/// loss of a constrain-and-scale attacker.
pub struct Constrained<'a, O: Objective> {
    pub inner: &'a O,
    pub anchor: &'a LayeredParams,
    pub alpha: f64,
}

impl<O: Objective> Objective for Constrained<'_, O> {
    fn sample_count(&self) -> usize {
        self.inner.sample_count()
    }

    fn loss_and_grad(&self, params: &LayeredParams, batch: &[usize]) -> Result<(f64, Gradient)> {
        let (loss, mut grad) = self.inner.loss_and_grad(params, batch)?;
        grad.scale(self.alpha);
        let penalty = params.squared_distance(self.anchor);
        grad.axpy(2.0 * (1.0 - self.alpha), &params.sub(self.anchor));
        Ok((self.alpha * loss + (1.0 - self.alpha) * penalty, grad))
    }
}

/// Mini-batch SGD for `cfg.local_epochs` passes; the shuffle stream depends
/// only on `(cfg.seed, round)`.
pub fn sgd<O: Objective>(
    start: &LayeredParams,
    objective: &O,
    cfg: &TrainingConfig,
    round: usize,
) -> Result<LayeredParams> {
    cfg.validate()?;
    let mut params = start.clone();
    if cfg.local_epochs == 0 {
        return Ok(params);
    }
    let n = objective.sample_count();
    if n == 0 {
        return Err(Error::Empty("training shard"));
    }
    let lr = cfg.lr_schedule.at(round);
    let mut rng = seed::rng(cfg.seed, &[round as u64, 0x7261_696e]);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.local_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grad) = objective.loss_and_grad(&params, batch)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { round });
            }
            params.axpy(-lr, &grad);
            if !params.is_finite() {
                return Err(Error::TrainingDiverged { round });
            }
        }
    }
    if !params.is_finite() {
        return Err(Error::TrainingDiverged { round });
    }
    Ok(params)
}

/// Honest client update: SGD with cross-entropy on the client's shard.
pub fn local_train(
    global: &LayeredParams,
    shard: &DatasetShard,
    cfg: &TrainingConfig,
    round: usize,
) -> Result<LayeredParams> {
    if cfg.local_epochs == 0 {
        return Ok(global.clone());
    }
    if shard.is_empty() {
        return Err(Error::Empty("training shard"));
    }
    let view = MlpView::new(global)?;
    if shard.dim() != view.input {
        return Err(Error::Shape(format!(
            "shard has {} features, model expects {}",
            shard.dim(),
            view.input
        )));
    }
    if let Some(s) = shard.samples.iter().find(|s| s.label >= view.classes) {
        return Err(Error::Shape(format!(
            "label {} outside {} model classes",
            s.label, view.classes
        )));
    }
    sgd(global, &Classification { shard }, cfg, round)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Accuracy restricted to each true class; 0 for classes absent from the set.
    pub per_class: Vec<f64>,
}

pub fn evaluate(model: &LayeredParams, testset: &DatasetShard) -> Result<Evaluation> {
    if testset.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let view = MlpView::new(model)?;
    if testset.dim() != view.input {
        return Err(Error::Shape(format!(
            "test set has {} features, model expects {}",
            testset.dim(),
            view.input
        )));
    }
    let mut hits = vec![0usize; view.classes];
    let mut counts = vec![0usize; view.classes];
    for s in &testset.samples {
        if s.label >= view.classes {
            return Err(Error::Shape(format!(
                "label {} outside model classes",
                s.label
            )));
        }
        counts[s.label] += 1;
        if view.predict(&s.features) == s.label {
            hits[s.label] += 1;
        }
    }
    let correct: usize = hits.iter().sum();
    Ok(Evaluation {
        accuracy: correct as f64 / testset.len() as f64,
        per_class: hits
            .iter()
            .zip(&counts)
            .map(|(&h, &c)| if c == 0 { 0.0 } else { h as f64 / c as f64 })
            .collect(),
    })
}
