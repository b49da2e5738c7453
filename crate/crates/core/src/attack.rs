//! Compromised-client behaviour: poisoned local training, the evasion loss,
//! model-replacement scaling and little-is-enough crafting.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::{flip_labels, poison_shard, ClientId, DatasetShard, Fragment, TriggerPattern};
use crate::error::{Error, Result};
use crate::model::{local_train, sgd, Classification, Constrained, LayeredParams, TrainingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackFamily {
    LabelFlip,
    PixelTrigger,
    Dba,
    ConstrainAndScale,
    ScaleReplacement,
    LittleIsEnough,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Schedule {
    SingleShot { round: usize },
    MultiShot { from_round: usize, to_round: usize },
}

impl Schedule {
    pub fn contains(&self, round: usize) -> bool {
        match *self {
            Schedule::SingleShot { round: r } => round == r,
            Schedule::MultiShot {
                from_round,
                to_round,
            } => (from_round..=to_round).contains(&round),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub family: AttackFamily,
    #[serde(default)]
    pub pdr: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Scaling factor for constrain-and-scale; the `z` multiplier for
    /// little-is-enough.
    #[serde(default = "default_scale")]
    pub scale_factor: f64,
    pub schedule: Schedule,
    pub trigger: TriggerPattern,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_scale() -> f64 {
    1.0
}

/// Default `z` for little-is-enough when none is configured.
pub const LIE_DEFAULT_Z: f64 = 1.5;

impl AttackSpec {
    pub fn validate(&self, rounds: Option<usize>, dim: Option<usize>) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pdr) {
            return Err(Error::Config(format!(
                "attack.pdr must be in [0, 1], got {}",
                self.pdr
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "attack.alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        let scale_ok = match self.family {
            AttackFamily::LittleIsEnough => self.scale_factor.is_finite(),
            _ => self.scale_factor >= 1.0 && self.scale_factor.is_finite(),
        };
        if !scale_ok {
            return Err(Error::Config(format!(
                "invalid attack.scale_factor {}",
                self.scale_factor
            )));
        }
        if let Schedule::MultiShot {
            from_round,
            to_round,
        } = self.schedule
        {
            if from_round > to_round {
                return Err(Error::Config(format!(
                    "empty attack window {from_round}..={to_round}"
                )));
            }
        }
        if let Some(t) = rounds {
            let last = match self.schedule {
                Schedule::SingleShot { round } => round,
                Schedule::MultiShot { to_round, .. } => to_round,
            };
            if last >= t {
                return Err(Error::Config(format!(
                    "attack schedule reaches round {last}, horizon is {t}"
                )));
            }
        }
        if let Some(d) = dim {
            self.trigger.validate(d)?;
        }
        Ok(())
    }
}

pub fn schedule_active(spec: &AttackSpec, round: usize) -> bool {
    spec.schedule.contains(round)
}

/// The fixed set of compromised identities and their DBA fragment
/// assignment (round-robin over the sorted ids).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompromisedCohort {
    pub client_ids: BTreeSet<ClientId>,
    pub fragments: BTreeMap<ClientId, usize>,
}

impl CompromisedCohort {
    pub fn new(client_ids: impl IntoIterator<Item = ClientId>, fragment_count: usize) -> Self {
        let client_ids: BTreeSet<ClientId> = client_ids.into_iter().collect();
        let k = fragment_count.max(1);
        let fragments = client_ids
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i % k))
            .collect();
        CompromisedCohort {
            client_ids,
            fragments,
        }
    }

    pub fn contains(&self, id: ClientId) -> bool {
        self.client_ids.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.client_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.client_ids.is_empty()
    }

    /// True when the cohort is not a strict minority of `total` clients.
    pub fn is_majority(&self, total: usize) -> bool {
        2 * self.len() >= total && !self.is_empty()
    }

    pub fn fragment_of(&self, id: ClientId) -> Fragment {
        self.fragments
            .get(&id)
            .map_or(Fragment::All, |&p| Fragment::Part(p))
    }
}

/// Per-coordinate mean and population standard deviation of honest
/// submissions in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct BenignStats {
    pub mean: LayeredParams,
    pub std: LayeredParams,
}

impl BenignStats {
    pub fn from_models<'a>(models: impl IntoIterator<Item = &'a LayeredParams>) -> Result<Self> {
        let models: Vec<&LayeredParams> = models.into_iter().collect();
        let mean = LayeredParams::mean(models.iter().copied())?;
        let m = mean.flatten();
        let mut var = vec![0.0; m.len()];
        for p in &models {
            for ((v, x), mu) in var.iter_mut().zip(p.flatten()).zip(&m) {
                *v += (x - mu) * (x - mu);
            }
        }
        let inv = 1.0 / models.len() as f64;
        let std: Vec<f64> = var.iter().map(|v| (v * inv).sqrt()).collect();
        Ok(BenignStats {
            std: mean.with_flat(&std)?,
            mean,
        })
    }
}

/// Per-call inputs that are not part of the attack spec.
#[derive(Debug, Clone, Copy)]
pub struct AttackContext<'a> {
    pub round: usize,
    /// Participants in this round (the `n` of model-replacement scaling).
    pub participants: usize,
    pub fragment: Fragment,
    pub benign_stats: Option<&'a BenignStats>,
    /// Seed for choosing which samples get poisoned.
    pub poison_seed: u64,
}

/// `global + factor * (model - global)`.
pub fn scale_toward(
    global: &LayeredParams,
    model: &LayeredParams,
    factor: f64,
) -> Result<LayeredParams> {
    global.check_congruent(model)?;
    let mut out = global.clone();
    out.axpy(factor, &model.sub(global));
    Ok(out)
}

fn poisoned(
    spec: &AttackSpec,
    shard: &DatasetShard,
    fragment: Fragment,
    seed: u64,
) -> Result<DatasetShard> {
    match spec.family {
        AttackFamily::LabelFlip => flip_labels(shard, spec.trigger.target_label, spec.pdr, seed),
        AttackFamily::Dba => poison_shard(shard, &spec.trigger, spec.pdr, fragment, seed),
        _ => poison_shard(shard, &spec.trigger, spec.pdr, Fragment::All, seed),
    }
}

/// The model a compromised client submits in an active round.
pub fn craft_update(
    spec: &AttackSpec,
    global: &LayeredParams,
    shard: &DatasetShard,
    training: &TrainingConfig,
    ctx: &AttackContext<'_>,
) -> Result<LayeredParams> {
    match spec.family {
        AttackFamily::LittleIsEnough => {
            let stats = ctx.benign_stats.ok_or(Error::MissingBenignStats)?;
            global.check_congruent(&stats.mean)?;
            let mut out = stats.mean.clone();
            out.axpy(spec.scale_factor, &stats.std);
            Ok(out)
        }
        AttackFamily::LabelFlip | AttackFamily::PixelTrigger | AttackFamily::Dba => {
            let data = poisoned(spec, shard, ctx.fragment, ctx.poison_seed)?;
            local_train(global, &data, training, ctx.round)
        }
        AttackFamily::ConstrainAndScale => {
            let data = poisoned(spec, shard, ctx.fragment, ctx.poison_seed)?;
            let x = if spec.alpha == 1.0 {
                local_train(global, &data, training, ctx.round)?
            } else {
                let inner = Classification { shard: &data };
                let obj = Constrained {
                    inner: &inner,
                    anchor: global,
                    alpha: spec.alpha,
                };
                sgd(global, &obj, training, ctx.round)?
            };
            if spec.scale_factor > 1.0 {
                scale_toward(global, &x, spec.scale_factor)
            } else {
                Ok(x)
            }
        }
        AttackFamily::ScaleReplacement => {
            let data = poisoned(spec, shard, ctx.fragment, ctx.poison_seed)?;
            let x = local_train(global, &data, training, ctx.round)?;
            scale_toward(global, &x, ctx.participants.max(1) as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_blobs;
    use crate::model::{init_model, ArchSpec};

    fn spec(family: AttackFamily) -> AttackSpec {
        AttackSpec {
            family,
            pdr: 0.3,
            alpha: 1.0,
            scale_factor: 1.0,
            schedule: Schedule::MultiShot {
                from_round: 0,
                to_round: 9,
            },
            trigger: TriggerPattern::corner(8, 3.0, 2),
        }
    }

    fn ctx(stats: Option<&BenignStats>) -> AttackContext<'_> {
        AttackContext {
            round: 1,
            participants: 10,
            fragment: Fragment::All,
            benign_stats: stats,
            poison_seed: 5,
        }
    }

    fn setup() -> (LayeredParams, DatasetShard, TrainingConfig) {
        let g = init_model(&ArchSpec::mlp(64, 8, 10), 1).unwrap();
        let shard = synth_blobs(10, 64, 6, 0.5, 3).unwrap();
        (
            g,
            shard,
            TrainingConfig {
                seed: 9,
                ..TrainingConfig::default()
            },
        )
    }

    #[test]
    fn schedules() {
        let mut s = spec(AttackFamily::PixelTrigger);
        s.schedule = Schedule::SingleShot { round: 5 };
        assert!(schedule_active(&s, 5));
        assert!(!schedule_active(&s, 6));
        s.schedule = Schedule::MultiShot {
            from_round: 3,
            to_round: 10,
        };
        assert!(schedule_active(&s, 7));
        assert!(!schedule_active(&s, 11));
    }

    #[test]
    fn zero_pdr_trigger_matches_honest_training() {
        let (g, shard, cfg) = setup();
        let mut s = spec(AttackFamily::PixelTrigger);
        s.pdr = 0.0;
        let crafted = craft_update(&s, &g, &shard, &cfg, &ctx(None)).unwrap();
        assert_eq!(crafted, local_train(&g, &shard, &cfg, 1).unwrap());
    }

    #[test]
    fn alpha_one_is_plain_poisoned_training() {
        let (g, shard, cfg) = setup();
        let a = craft_update(
            &spec(AttackFamily::ConstrainAndScale),
            &g,
            &shard,
            &cfg,
            &ctx(None),
        )
        .unwrap();
        let b = craft_update(
            &spec(AttackFamily::PixelTrigger),
            &g,
            &shard,
            &cfg,
            &ctx(None),
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn evasion_weight_pulls_toward_global() {
        let (g, shard, cfg) = setup();
        let free = craft_update(
            &spec(AttackFamily::ConstrainAndScale),
            &g,
            &shard,
            &cfg,
            &ctx(None),
        )
        .unwrap();
        let mut s = spec(AttackFamily::ConstrainAndScale);
        s.alpha = 0.5;
        let held = craft_update(&s, &g, &shard, &cfg, &ctx(None)).unwrap();
        assert!(held.squared_distance(&g) < free.squared_distance(&g));
    }

    #[test]
    fn replacement_recovers_backdoor_model() {
        let (g, shard, cfg) = setup();
        let s = spec(AttackFamily::ScaleReplacement);
        let crafted = craft_update(&s, &g, &shard, &cfg, &ctx(None)).unwrap();
        let x = craft_update(
            &spec(AttackFamily::PixelTrigger),
            &g,
            &shard,
            &cfg,
            &ctx(None),
        )
        .unwrap();
        let mut agg = crafted.clone();
        agg.axpy(9.0, &g);
        agg.scale(0.1);
        for (a, b) in agg.flatten().iter().zip(x.flatten()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn lie_with_zero_z_is_benign_mean() {
        let (g, _, _) = setup();
        let a = g.clone();
        let mut b = g.clone();
        b.scale(3.0);
        let stats = BenignStats::from_models([&a, &b]).unwrap();
        let mut s = spec(AttackFamily::LittleIsEnough);
        s.scale_factor = 0.0;
        let out = craft_update(
            &s,
            &g,
            &DatasetShard::new(Vec::new()).unwrap(),
            &TrainingConfig::default(),
            &ctx(Some(&stats)),
        )
        .unwrap();
        assert_eq!(out, stats.mean);
        let missing = craft_update(
            &s,
            &g,
            &DatasetShard::new(Vec::new()).unwrap(),
            &TrainingConfig::default(),
            &ctx(None),
        );
        assert!(matches!(missing, Err(Error::MissingBenignStats)));
    }

    #[test]
    fn cohort_fragments_round_robin() {
        let c = CompromisedCohort::new([9, 3, 5, 1, 7], 4);
        assert_eq!(c.fragment_of(1), Fragment::Part(0));
        assert_eq!(c.fragment_of(7), Fragment::Part(3));
        assert_eq!(c.fragment_of(9), Fragment::Part(0));
        assert_eq!(c.fragment_of(2), Fragment::All);
        assert!(!c.is_majority(20));
    }

    #[test]
    fn validation() {
        let mut s = spec(AttackFamily::ScaleReplacement);
        assert!(s.validate(Some(10), Some(64)).is_ok());
        assert!(s.validate(Some(9), Some(64)).is_err());
        s.alpha = 1.5;
        assert!(s.validate(None, None).is_err());
    }
}
