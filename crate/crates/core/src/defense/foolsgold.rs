//! FoolsGold: clients whose cumulative updates point in the same direction
//! as another client's get their learning rate cut.
//!
//! Per-client weights follow the original algorithm: pairwise cosine
//! similarity of cumulative updates, pardoning (similarities to a client with
//! a larger maximum are shrunk by the ratio of maxima), `1 - max similarity`,
//! normalisation by the largest weight, then a logit with confidence 1
//! (`ln(w / (1 - w)) + 0.5`) clipped to `[0, 1]`.

use std::collections::BTreeMap;

use crate::data::ClientId;
use crate::defense::{check_submissions, Defense, DefenseOutcome, Submission};
use crate::error::Result;
use crate::model::LayeredParams;

fn cosine(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

/// Learning-rate weights in `[0, 1]` for each history vector. A zero-norm
/// history carries no evidence and keeps weight 1.
pub fn foolsgold_weights(histories: &[Vec<f64>]) -> Vec<f64> {
    let n = histories.len();
    let norms: Vec<f64> = histories
        .iter()
        .map(|h| h.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let active: Vec<usize> = (0..n).filter(|&i| norms[i] > 0.0).collect();
    let mut weights = vec![1.0; n];
    if active.len() < 2 {
        return weights;
    }

    let m = active.len();
    let mut cs = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in 0..m {
            if a != b {
                let (i, j) = (active[a], active[b]);
                cs[a][b] = cosine(&histories[i], &histories[j], norms[i], norms[j]);
            }
        }
    }
    let row_max = |row: &[f64], skip: usize| {
        row.iter()
            .enumerate()
            .filter(|&(j, _)| j != skip)
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let maxcs: Vec<f64> = (0..m).map(|a| row_max(&cs[a], a)).collect();
    for a in 0..m {
        for b in 0..m {
            if a != b && maxcs[a] < maxcs[b] && maxcs[b] > 0.0 {
                cs[a][b] *= maxcs[a] / maxcs[b];
            }
        }
    }
    let mut wv: Vec<f64> = (0..m)
        .map(|a| (1.0 - row_max(&cs[a], a)).clamp(0.0, 1.0))
        .collect();
    let top = wv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        wv.iter_mut().for_each(|w| *w = 0.0);
    } else {
        for w in wv.iter_mut() {
            *w /= top;
            if *w >= 1.0 {
                *w = 0.99;
            }
            let logit = (*w / (1.0 - *w)).ln() + 0.5;
            *w = if logit.is_nan() {
                0.0
            } else {
                logit.clamp(0.0, 1.0)
            };
        }
    }
    for (a, &i) in active.iter().enumerate() {
        weights[i] = wv[a];
    }
    weights
}

/// Stateful FoolsGold aggregator holding every client's cumulative update.
#[derive(Debug, Clone, Default)]
pub struct FoolsGold {
    history: BTreeMap<ClientId, Vec<f64>>,
    pub last_weights: Vec<f64>,
}

impl FoolsGold {
    pub fn history(&self, client: ClientId) -> Option<&[f64]> {
        self.history.get(&client).map(Vec::as_slice)
    }
}

impl Defense for FoolsGold {
    fn name(&self) -> &'static str {
        "foolsgold"
    }

    fn aggregate(
        &mut self,
        submissions: &[Submission],
        global: &LayeredParams,
    ) -> Result<DefenseOutcome> {
        check_submissions(submissions)?;
        global.check_congruent(&submissions[0].params)?;
        let g = global.flatten();
        let deltas: Vec<Vec<f64>> = submissions
            .iter()
            .map(|s| {
                s.params
                    .flatten()
                    .iter()
                    .zip(&g)
                    .map(|(w, g)| w - g)
                    .collect()
            })
            .collect();
        for (s, d) in submissions.iter().zip(&deltas) {
            let h = self
                .history
                .entry(s.client_id)
                .or_insert_with(|| vec![0.0; d.len()]);
            h.iter_mut().zip(d).for_each(|(a, b)| *a += b);
        }
        let histories: Vec<Vec<f64>> = submissions
            .iter()
            .map(|s| self.history[&s.client_id].clone())
            .collect();
        let weights = foolsgold_weights(&histories);
        let total: f64 = weights.iter().sum();
        let mut agg = g.clone();
        if total > 0.0 {
            for (w, d) in weights.iter().zip(&deltas) {
                for (a, v) in agg.iter_mut().zip(d) {
                    *a += w / total * v;
                }
            }
        }
        let benign_set = submissions
            .iter()
            .zip(&weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(s, _)| s.client_id)
            .collect();
        self.last_weights = weights;
        Ok(DefenseOutcome {
            benign_set,
            aggregated: global.with_flat(&agg)?,
            per_client_flags: Vec::new(),
            score_matrix: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(i: usize, d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn colluding_pair_is_zeroed() {
        let h = vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]];
        assert_eq!(foolsgold_weights(&h), vec![0.0, 0.0]);
    }

    #[test]
    fn orthogonal_histories_keep_full_weight() {
        let h: Vec<_> = (0..5).map(|i| unit(i, 5)).collect();
        assert_eq!(foolsgold_weights(&h), vec![1.0; 5]);
    }

    #[test]
    fn zero_history_keeps_weight_one() {
        let h = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]];
        assert_eq!(foolsgold_weights(&h), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn cumulative_history_accumulates() {
        let g = LayeredParams::new(vec![crate::model::Layer {
            name: "w".into(),
            shape: vec![2],
            values: vec![0.0, 0.0],
        }])
        .unwrap();
        let mk = |id, v: Vec<f64>| Submission {
            client_id: id,
            params: g.with_flat(&v).unwrap(),
        };
        let mut fg = FoolsGold::default();
        fg.aggregate(&[mk(0, vec![1.0, 0.0]), mk(1, vec![0.0, 1.0])], &g)
            .unwrap();
        fg.aggregate(&[mk(0, vec![1.0, 0.0]), mk(1, vec![0.0, 1.0])], &g)
            .unwrap();
        assert_eq!(fg.history(0).unwrap(), &[2.0, 0.0]);
    }
}
