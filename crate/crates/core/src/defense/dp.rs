use rand_distr::{Distribution, Normal};

use crate::defense::{check_submissions, Defense, DefenseOutcome, Submission};
use crate::error::{Error, Result};
use crate::model::LayeredParams;
use crate::seed;

/// Norm-clipped averaging of updates plus Gaussian noise
/// `N(0, sigma^2 * clip_norm^2)` on every coordinate.
pub fn dp_defense(
    submissions: &[Submission],
    global: &LayeredParams,
    clip_norm: f64,
    sigma: f64,
    seed: u64,
) -> Result<DefenseOutcome> {
    check_submissions(submissions)?;
    global.check_congruent(&submissions[0].params)?;
    if !(clip_norm > 0.0) || !(sigma >= 0.0) {
        return Err(Error::Config(
            "dp needs clip_norm > 0 and sigma >= 0".into(),
        ));
    }
    let mut avg = global.zeros_like();
    let inv = 1.0 / submissions.len() as f64;
    for s in submissions {
        let delta = s.params.sub(global);
        let norm = delta.norm();
        let factor = if norm > clip_norm {
            clip_norm / norm
        } else {
            1.0
        };
        avg.axpy(factor * inv, &delta);
    }
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma * clip_norm).expect("finite std");
        let mut rng = seed::rng(seed, &[0x6470]);
        for layer in avg.layers_mut() {
            for v in &mut layer.values {
                *v += noise.sample(&mut rng);
            }
        }
    }
    let mut aggregated = global.clone();
    aggregated.axpy(1.0, &avg);
    Ok(DefenseOutcome::keep_all(submissions, aggregated))
}

/// DP aggregation whose noise stream advances once per call.
#[derive(Debug, Clone)]
pub struct DifferentialPrivacy {
    pub clip_norm: f64,
    pub sigma: f64,
    seed: u64,
    calls: u64,
}

impl DifferentialPrivacy {
    pub fn new(clip_norm: f64, sigma: f64, seed: u64) -> Self {
        DifferentialPrivacy {
            clip_norm,
            sigma,
            seed,
            calls: 0,
        }
    }
}

impl Defense for DifferentialPrivacy {
    fn name(&self) -> &'static str {
        "dp"
    }

    fn aggregate(
        &mut self,
        submissions: &[Submission],
        global: &LayeredParams,
    ) -> Result<DefenseOutcome> {
        self.calls += 1;
        dp_defense(
            submissions,
            global,
            self.clip_norm,
            self.sigma,
            seed::derive(self.seed, &[self.calls]),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Layer;

    fn model(v: Vec<f64>) -> LayeredParams {
        let n = v.len();
        LayeredParams::new(vec![Layer {
            name: "w".into(),
            shape: vec![n],
            values: v,
        }])
        .unwrap()
    }

    fn sub(id: u32, v: Vec<f64>) -> Submission {
        Submission {
            client_id: id,
            params: model(v),
        }
    }

    #[test]
    fn no_noise_under_clip_is_plain_mean() {
        let g = model(vec![0.0, 0.0]);
        let subs = vec![sub(0, vec![0.1, 0.2]), sub(1, vec![0.3, 0.0])];
        let out = dp_defense(&subs, &g, 10.0, 0.0, 1).unwrap();
        let v = out.aggregated.flatten();
        assert!((v[0] - 0.2).abs() < 1e-15 && (v[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn oversized_update_is_halved() {
        let g = model(vec![1.0, 1.0]);
        let subs = vec![sub(0, vec![1.0 + 2.0 * 0.6, 1.0 + 2.0 * 0.8])];
        let out = dp_defense(&subs, &g, 1.0, 0.0, 1).unwrap();
        let v = out.aggregated.flatten();
        assert!((v[0] - 1.6).abs() < 1e-12 && (v[1] - 1.8).abs() < 1e-12);
    }

    #[test]
    fn noise_is_seeded() {
        let g = model(vec![0.0; 4]);
        let subs = vec![sub(0, vec![0.1; 4])];
        let a = dp_defense(&subs, &g, 1.0, 0.5, 42).unwrap();
        let b = dp_defense(&subs, &g, 1.0, 0.5, 42).unwrap();
        let c = dp_defense(&subs, &g, 1.0, 0.5, 43).unwrap();
        assert_eq!(a.aggregated, b.aggregated);
        assert_ne!(a.aggregated, c.aggregated);
    }
}
