use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{craft_update, schedule_active, AttackContext, BenignStats, CompromisedCohort};
use crate::data::{backdoor_testset, dirichlet_partition, ClientId, DatasetShard, PartitionSpec};
use crate::defense::Submission;
use crate::error::{Error, Result};
use crate::model::{evaluate, init_model, local_train, LayeredParams, TrainingConfig};
use crate::seed;
use crate::sim::config::ExperimentConfig;

/// Environment variable capping the worker threads used for client training.
pub const THREADS_ENV: &str = "FEDSIEVE_THREADS";

/// One client's upload plus the harness-only ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSubmission {
    pub client_id: ClientId,
    pub params: LayeredParams,
    pub ground_truth_malicious: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub round: usize,
    #[serde(rename = "MA")]
    pub ma: f64,
    #[serde(rename = "BA")]
    pub ba: f64,
    pub benign_set: Vec<ClientId>,
    /// Flagged-layer counts per participant (empty for non-FLD defenses).
    pub flags: BTreeMap<ClientId, usize>,
    pub participants: Vec<ClientId>,
    /// Participants that submitted a crafted update this round.
    pub attackers: Vec<ClientId>,
    pub wall_time: f64,
}

/// A worker pool honouring `FEDSIEVE_THREADS` when set to a positive integer.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| {
            Error::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))
        })?;
        if n == 0 {
            return Err(Error::Config(format!("{THREADS_ENV} must be >= 1")));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Static state of an experiment: data, shards, cohort and test sets.
pub struct Setup {
    pub shards: Vec<DatasetShard>,
    pub cohort: CompromisedCohort,
    pub honest: Vec<ClientId>,
    pub testset: DatasetShard,
    pub backdoor_testset: DatasetShard,
    pub initial: LayeredParams,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let (train, testset) = cfg.dataset.load(cfg.seed)?;
        let classes = train.class_count().max(testset.class_count());
        let dim = train.dim();
        if let Some(a) = &cfg.attack {
            a.validate(Some(cfg.rounds), Some(dim))?;
            if a.trigger.target_label >= classes {
                return Err(Error::Config(format!(
                    "target label {} outside {classes} classes",
                    a.trigger.target_label
                )));
            }
        }
        let shards = dirichlet_partition(
            &train,
            &PartitionSpec {
                dirichlet_alpha: cfg.dirichlet_alpha,
                client_count: cfg.clients,
                seed: seed::derive(cfg.seed, &[0x7061_7274]),
            },
        )?;
        let mut ids: Vec<ClientId> = (0..cfg.clients as ClientId).collect();
        ids.shuffle(&mut seed::rng(cfg.seed, &[0x636f_6d70]));
        let population = cfg.compromised_population();
        let fragments = cfg.attack.as_ref().map_or(1, |a| a.trigger.fragment_count);
        let cohort = CompromisedCohort::new(ids[..population].iter().copied(), fragments);
        let honest = (0..cfg.clients as ClientId)
            .filter(|c| !cohort.contains(*c))
            .collect();
        let backdoor_testset = backdoor_testset(&testset, &cfg.trigger())?;
        let initial = init_model(
            &cfg.arch(dim, classes),
            seed::derive(cfg.seed, &[0x696e_6974]),
        )?;
        Ok(Setup {
            shards,
            cohort,
            honest,
            testset,
            backdoor_testset,
            initial,
        })
    }

    /// The round's participants, sorted: exactly `attackers_per_round`
    /// drawn from the compromised cohort and the rest from honest clients.
    pub fn sample_round(&self, cfg: &ExperimentConfig, round: usize) -> Vec<ClientId> {
        let mut rng = seed::rng(cfg.seed, &[0x7361_6d70, round as u64]);
        let n = cfg.per_round();
        let bad = cfg.attackers_per_round().min(self.cohort.len());
        let good = (n - bad).min(self.honest.len());
        let cohort: Vec<ClientId> = self.cohort.client_ids.iter().copied().collect();
        let mut chosen: Vec<ClientId> = index::sample(&mut rng, cohort.len(), bad)
            .iter()
            .map(|i| cohort[i])
            .collect();
        chosen.extend(
            index::sample(&mut rng, self.honest.len(), good)
                .iter()
                .map(|i| self.honest[i]),
        );
        chosen.sort_unstable();
        chosen
    }
}

fn client_training(cfg: &ExperimentConfig, client: ClientId) -> TrainingConfig {
    TrainingConfig {
        seed: seed::derive(cfg.seed, &[0x7472_6e67, u64::from(client)]),
        ..cfg.training.clone()
    }
}

/// One federated round: honest training, crafted attacker updates, and the
/// submissions in participant order.
pub fn round_submissions(
    cfg: &ExperimentConfig,
    setup: &Setup,
    global: &LayeredParams,
    participants: &[ClientId],
    round: usize,
) -> Result<Vec<RoundSubmission>> {
    let active = cfg.attack.as_ref().filter(|a| schedule_active(a, round));
    let is_attacker = |c: ClientId| active.is_some() && setup.cohort.contains(c);

    let honest: Vec<(ClientId, LayeredParams)> = participants
        .par_iter()
        .filter(|&&c| !is_attacker(c))
        .map(|&c| {
            Ok((
                c,
                local_train(
                    global,
                    &setup.shards[c as usize],
                    &client_training(cfg, c),
                    round,
                )?,
            ))
        })
        .collect::<Result<_>>()?;

    let mut crafted = Vec::new();
    if let Some(spec) = active {
        let stats = if honest.is_empty() {
            None
        } else {
            Some(BenignStats::from_models(honest.iter().map(|(_, p)| p))?)
        };
        crafted = participants
            .par_iter()
            .filter(|&&c| is_attacker(c))
            .map(|&c| {
                let ctx = AttackContext {
                    round,
                    participants: participants.len(),
                    fragment: setup.cohort.fragment_of(c),
                    benign_stats: stats.as_ref(),
                    poison_seed: seed::derive(cfg.seed, &[0x706f_6973, round as u64, u64::from(c)]),
                };
                Ok((
                    c,
                    craft_update(
                        spec,
                        global,
                        &setup.shards[c as usize],
                        &client_training(cfg, c),
                        &ctx,
                    )?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
    }

    let mut all: Vec<RoundSubmission> = honest
        .into_iter()
        .map(|(client_id, params)| RoundSubmission {
            client_id,
            params,
            ground_truth_malicious: false,
        })
        .chain(
            crafted
                .into_iter()
                .map(|(client_id, params)| RoundSubmission {
                    client_id,
                    params,
                    ground_truth_malicious: true,
                }),
        )
        .collect();
    all.sort_by_key(|s| s.client_id);
    Ok(all)
}

/// Runs the whole federated experiment and returns one record per round.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>> {
    let pool = thread_pool()?;
    pool.install(|| run_in_pool(cfg))
}

fn run_in_pool(cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>> {
    let setup = Setup::new(cfg)?;
    let mut defense = cfg.defense.build(seed::derive(cfg.seed, &[0x6465_6673]))?;
    let mut global = setup.initial.clone();
    let mut records = Vec::with_capacity(cfg.rounds);
    for round in 0..cfg.rounds {
        let start = Instant::now();
        let participants = setup.sample_round(cfg, round);
        let mut step = || -> Result<MetricsRecord> {
            let subs = round_submissions(cfg, &setup, &global, &participants, round)?;
            let attackers = subs
                .iter()
                .filter(|s| s.ground_truth_malicious)
                .map(|s| s.client_id)
                .collect();
            // defenses only ever see (client_id, params)
            let visible: Vec<Submission> = subs
                .into_iter()
                .map(|s| Submission {
                    client_id: s.client_id,
                    params: s.params,
                })
                .collect();
            let outcome = defense.aggregate(&visible, &global)?;
            if !outcome.aggregated.is_finite() {
                return Err(Error::TrainingDiverged { round });
            }
            global = outcome.aggregated;
            let ma = evaluate(&global, &setup.testset)?.accuracy;
            let ba = evaluate(&global, &setup.backdoor_testset)?.accuracy;
            let flags = if outcome.per_client_flags.is_empty() {
                BTreeMap::new()
            } else {
                visible
                    .iter()
                    .map(|s| s.client_id)
                    .zip(outcome.per_client_flags.iter().copied())
                    .collect()
            };
            let benign: BTreeSet<ClientId> = outcome.benign_set;
            Ok(MetricsRecord {
                round,
                ma,
                ba,
                benign_set: benign.into_iter().collect(),
                flags,
                participants: participants.clone(),
                attackers,
                wall_time: start.elapsed().as_secs_f64(),
            })
        };
        records.push(step().map_err(|e| e.in_round(round))?);
    }
    Ok(records)
}
