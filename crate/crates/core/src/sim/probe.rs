//! Convergence probe on a strongly convex testbed: client `i` minimises
//! `0.5 * a_i * ||w - c_i||^2`, so the honest population objective has the
//! closed-form optimum `w* = sum(a_i c_i) / sum(a_i)`.

use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::attack::scale_toward;
use crate::data::ClientId;
use crate::defense::{DefenseConfig, DefenseName, Submission};
use crate::error::{Error, Result};
use crate::model::{
    init_model, sgd, ArchSpec, LayeredParams, LrSchedule, Quadratic, TrainingConfig,
};
use crate::seed;
use crate::sim::harness::thread_pool;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub seed: u64,
    pub clients: usize,
    pub participation: f64,
    pub rounds: usize,
    /// Fraction of each round's participants running model replacement.
    pub pmr: f64,
    /// Parameter count of each layer.
    pub layers: Vec<usize>,
    pub theta: f64,
    pub eps: f64,
    pub local_steps: usize,
    pub curvature_min: f64,
    pub curvature_max: f64,
    /// Standard deviation of client optima around the shared centre.
    pub center_spread: f64,
    /// Distance per coordinate between an attacker's target and its honest optimum.
    pub attack_offset: f64,
    pub defense: DefenseConfig,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            seed: 0,
            clients: 10,
            participation: 1.0,
            rounds: 200,
            pmr: 0.2,
            layers: vec![6, 3, 4, 2],
            theta: 2.0,
            eps: 4.0,
            local_steps: 1,
            curvature_min: 0.8,
            curvature_max: 1.2,
            center_spread: 0.1,
            attack_offset: 5.0,
            defense: DefenseConfig::named(DefenseName::Fld),
        }
    }
}

impl ProbeConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ProbeConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 || self.layers.is_empty() || self.layers.contains(&0) {
            return Err(Error::Config(
                "probe needs clients >= 1 and non-empty layers".into(),
            ));
        }
        if !(self.participation > 0.0 && self.participation <= 1.0)
            || !(0.0..1.0).contains(&self.pmr)
        {
            return Err(Error::Config(
                "probe participation must be in (0, 1] and pmr in [0, 1)".into(),
            ));
        }
        if !(self.theta > 0.0 && self.eps > 0.0) {
            return Err(Error::Config("probe theta and eps must be > 0".into()));
        }
        if !(self.curvature_min > 0.0 && self.curvature_min <= self.curvature_max) {
            return Err(Error::Config(
                "probe curvatures must satisfy 0 < min <= max".into(),
            ));
        }
        Ok(())
    }

    pub fn per_round(&self) -> usize {
        ((self.participation * self.clients as f64).floor() as usize).max(1)
    }

    pub fn attackers_per_round(&self) -> usize {
        (self.pmr * self.per_round() as f64 - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    /// `F(G^t) - F*` after each round.
    pub gaps: Vec<f64>,
    pub f_star: f64,
    pub optimum: Vec<f64>,
    /// Rounds in which every attacker was excluded.
    pub attackers_excluded: usize,
}

impl ProbeReport {
    pub fn final_gap(&self) -> f64 {
        self.gaps.last().copied().unwrap_or(f64::NAN)
    }
}

struct Client {
    objective: Quadratic,
    target: Option<Quadratic>,
}

/// Population objective over honest clients, equally weighted.
fn honest_objective(clients: &[Client], w: &LayeredParams) -> f64 {
    let honest: Vec<&Client> = clients.iter().filter(|c| c.target.is_none()).collect();
    honest.iter().map(|c| c.objective.value(w)).sum::<f64>() / honest.len() as f64
}

pub fn convergence_probe(cfg: &ProbeConfig) -> Result<ProbeReport> {
    cfg.validate()?;
    thread_pool()?.install(|| run_probe(cfg))
}

fn run_probe(cfg: &ProbeConfig) -> Result<ProbeReport> {
    let arch = ArchSpec::flat(&cfg.layers);
    let template = init_model(&arch, seed::derive(cfg.seed, &[0x6731]))?;
    let m = template.num_params();
    let mut rng = seed::rng(cfg.seed, &[0x7072_6f62]);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let shared: Vec<f64> = (0..m).map(|_| unit.sample(&mut rng)).collect();

    let mut ids: Vec<ClientId> = (0..cfg.clients as ClientId).collect();
    ids.shuffle(&mut rng);
    let bad_count = ((cfg.pmr * cfg.clients as f64 - 1e-9).ceil().max(0.0) as usize)
        .max(cfg.attackers_per_round());
    let bad: Vec<ClientId> = ids[..bad_count.min(cfg.clients)].to_vec();
    let mut good: Vec<ClientId> = ids[bad.len()..].to_vec();
    good.sort_unstable();
    if good.is_empty() {
        return Err(Error::Config(
            "probe needs at least one honest client".into(),
        ));
    }

    let clients: Vec<Client> = (0..cfg.clients as ClientId)
        .map(|id| {
            let a = rng.random_range(cfg.curvature_min..=cfg.curvature_max);
            let c: Vec<f64> = shared
                .iter()
                .map(|s| s + cfg.center_spread * unit.sample(&mut rng))
                .collect();
            let target = bad.contains(&id).then(|| {
                let t: Vec<f64> = c
                    .iter()
                    .map(|v| v + cfg.attack_offset * (1.0 + 0.1 * unit.sample(&mut rng)))
                    .collect();
                Quadratic {
                    center: template.with_flat(&t).expect("same length"),
                    curvature: a,
                }
            });
            Ok(Client {
                objective: Quadratic {
                    center: template.with_flat(&c)?,
                    curvature: a,
                },
                target,
            })
        })
        .collect::<Result<_>>()?;

    let (num, den) = clients.iter().filter(|c| c.target.is_none()).fold(
        (vec![0.0; m], 0.0),
        |(mut num, den), c| {
            for (n, v) in num.iter_mut().zip(c.objective.center.flatten()) {
                *n += c.objective.curvature * v;
            }
            (num, den + c.objective.curvature)
        },
    );
    let optimum: Vec<f64> = num.iter().map(|v| v / den).collect();
    let f_star = honest_objective(&clients, &template.with_flat(&optimum)?);

    let mut defense = cfg.defense.build(seed::derive(cfg.seed, &[0x6465_6673]))?;
    let mut global = template.zeros_like();
    let n = cfg.per_round();
    let per_bad = cfg.attackers_per_round().min(bad.len());
    let mut gaps = Vec::with_capacity(cfg.rounds);
    let mut attackers_excluded = 0;
    for round in 0..cfg.rounds {
        let mut rng = seed::rng(cfg.seed, &[0x0072_6e64, round as u64]);
        let mut chosen: Vec<ClientId> = index::sample(&mut rng, bad.len(), per_bad)
            .iter()
            .map(|i| bad[i])
            .collect();
        chosen.extend(
            index::sample(&mut rng, good.len(), (n - per_bad).min(good.len()))
                .iter()
                .map(|i| good[i]),
        );
        chosen.sort_unstable();
        let train = TrainingConfig {
            local_epochs: cfg.local_steps,
            batch_size: 1,
            lr_schedule: LrSchedule::Decaying {
                theta: cfg.theta,
                eps: cfg.eps,
            },
            seed: cfg.seed,
        };
        let subs = chosen
            .iter()
            .map(|&id| {
                let c = &clients[id as usize];
                let params = match &c.target {
                    None => sgd(&global, &c.objective, &train, round)?,
                    Some(t) => scale_toward(
                        &global,
                        &sgd(&global, t, &train, round)?,
                        chosen.len() as f64,
                    )?,
                };
                Ok(Submission {
                    client_id: id,
                    params,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e: Error| e.in_round(round))?;
        let outcome = defense
            .aggregate(&subs, &global)
            .map_err(|e| e.in_round(round))?;
        if chosen
            .iter()
            .filter(|id| bad.contains(id))
            .all(|id| !outcome.benign_set.contains(id))
        {
            attackers_excluded += 1;
        }
        global = outcome.aggregated;
        gaps.push(honest_objective(&clients, &global) - f_star);
    }
    Ok(ProbeReport {
        gaps,
        f_star,
        optimum,
        attackers_excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn honest_population_converges_monotonically() {
        let cfg = ProbeConfig {
            pmr: 0.0,
            defense: DefenseConfig::named(DefenseName::None),
            ..ProbeConfig::default()
        };
        let r = convergence_probe(&cfg).unwrap();
        let t = r.gaps.len();
        assert!(r.gaps[t - 1] <= r.gaps[t / 2 - 1] && r.gaps[t / 2 - 1] <= r.gaps[0]);
        assert!(r.gaps.iter().all(|g| *g >= -1e-12));
    }
}
