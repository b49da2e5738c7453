use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::data::DatasetShard;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub dirichlet_alpha: f64,
    pub client_count: usize,
    pub seed: u64,
}

/// Draws from a symmetric Dirichlet(alpha, ..., alpha) of dimension `k`.
///
/// For alpha < 1 the gamma variates are formed in log space as
/// `Gamma(alpha + 1) * U^(1/alpha)` so tiny concentrations do not underflow
/// to an all-zero vector.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: f64, k: usize, rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = if alpha < 1.0 {
        let gamma = Gamma::new(alpha + 1.0, 1.0).expect("positive shape");
        (0..k)
            .map(|_| {
                let g: f64 = gamma.sample(rng);
                let u: f64 = 1.0 - rng.random::<f64>();
                g.ln() + u.ln() / alpha
            })
            .collect()
    } else {
        let gamma = Gamma::new(alpha, 1.0).expect("positive shape");
        (0..k).map(|_| gamma.sample(rng).ln()).collect()
    };
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Label-skewed split: each class's samples are divided among clients by
/// proportions drawn from Dirichlet(alpha). Clients left empty receive one
/// random sample taken from the currently largest client.
pub fn dirichlet_partition(data: &DatasetShard, spec: &PartitionSpec) -> Result<Vec<DatasetShard>> {
    if data.is_empty() {
        return Err(Error::Empty("dataset to partition"));
    }
    if !(spec.dirichlet_alpha > 0.0 && spec.dirichlet_alpha.is_finite()) {
        return Err(Error::Config(format!(
            "dirichlet alpha must be > 0, got {}",
            spec.dirichlet_alpha
        )));
    }
    let clients = spec.client_count;
    if clients == 0 {
        return Err(Error::Config("client_count must be >= 1".into()));
    }
    if clients > data.len() {
        return Err(Error::Config(format!(
            "{clients} clients cannot each receive a sample from {} samples",
            data.len()
        )));
    }
    let mut rng = seed::rng(spec.seed, &[0x6469_7269]);

    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in data.samples.iter().enumerate() {
        by_class.entry(s.label).or_default().push(i);
    }

    let mut assignment: Vec<Vec<usize>> = vec![Vec::new(); clients];
    for indices in by_class.values_mut() {
        indices.shuffle(&mut rng);
        let props = sample_dirichlet(spec.dirichlet_alpha, clients, &mut rng);
        let n = indices.len();
        let mut start = 0usize;
        let mut cum = 0.0;
        for (c, p) in props.iter().enumerate() {
            cum += p;
            let end = if c + 1 == clients {
                n
            } else {
                ((cum * n as f64).round() as usize).clamp(start, n)
            };
            assignment[c].extend_from_slice(&indices[start..end]);
            start = end;
        }
    }

    while let Some(empty) = assignment.iter().position(Vec::is_empty) {
        let largest = (0..clients)
            .max_by(|&a, &b| {
                assignment[a]
                    .len()
                    .cmp(&assignment[b].len())
                    .then(b.cmp(&a))
            })
            .expect("at least one client");
        let pick = rng.random_range(0..assignment[largest].len());
        let moved = assignment[largest].swap_remove(pick);
        assignment[empty].push(moved);
    }

    Ok(assignment
        .into_iter()
        .enumerate()
        .map(|(c, mut idx)| {
            idx.sort_unstable();
            DatasetShard {
                samples: idx.into_iter().map(|i| data.samples[i].clone()).collect(),
                owner: Some(c as u32),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_blobs;

    #[test]
    fn single_client_gets_everything() {
        let data = synth_blobs(4, 3, 10, 0.5, 1).unwrap();
        let spec = PartitionSpec {
            dirichlet_alpha: 0.5,
            client_count: 1,
            seed: 3,
        };
        let parts = dirichlet_partition(&data, &spec).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].samples, data.samples);
    }

    #[test]
    fn disjoint_exhaustive_and_nonempty() {
        let data = synth_blobs(10, 3, 30, 0.5, 1).unwrap();
        for seed in 0..5 {
            let spec = PartitionSpec {
                dirichlet_alpha: 0.05,
                client_count: 20,
                seed,
            };
            let parts = dirichlet_partition(&data, &spec).unwrap();
            assert!(parts.iter().all(|p| !p.is_empty()));
            let mut all: Vec<_> = parts.iter().flat_map(|p| p.samples.iter()).collect();
            assert_eq!(all.len(), data.len());
            all.sort_by(|a, b| a.features.partial_cmp(&b.features).unwrap());
            all.dedup();
            assert_eq!(all.len(), data.len());
        }
    }

    #[test]
    fn dirichlet_draws_are_simplex_points() {
        let mut rng = seed::rng(1, &[]);
        for alpha in [0.01, 0.1, 1.0, 100.0] {
            let p = sample_dirichlet(alpha, 10, &mut rng);
            assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_alpha() {
        let data = synth_blobs(2, 2, 5, 0.5, 1).unwrap();
        let spec = PartitionSpec {
            dirichlet_alpha: 0.0,
            client_count: 2,
            seed: 1,
        };
        assert!(dirichlet_partition(&data, &spec).is_err());
        assert!(dirichlet_partition(
            &DatasetShard::default(),
            &PartitionSpec {
                dirichlet_alpha: 1.0,
                ..spec
            }
        )
        .is_err());
    }
}
