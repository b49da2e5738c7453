use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data::{DatasetShard, Sample};
use crate::error::{Error, Result};
use crate::seed;

/// Fixed class means for Gaussian blob data; train and test splits drawn from
/// one generator share the same means.
#[derive(Debug, Clone)]
pub struct BlobGenerator {
    means: Vec<Vec<f64>>,
}

impl BlobGenerator {
    /// Class means are standard normal vectors.
    pub fn new(classes: usize, dim: usize, seed: u64) -> Result<Self> {
        if classes < 2 || dim < 2 {
            return Err(Error::Config(format!(
                "blobs need classes >= 2 and dim >= 2, got {classes} x {dim}"
            )));
        }
        let mut rng = seed::rng(seed, &[0x6d65_616e]);
        let means = (0..classes)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        Ok(BlobGenerator { means })
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    /// `per_class` samples of each class with isotropic noise of std `spread`,
    /// ordered class by class.
    pub fn sample(&self, per_class: usize, spread: f64, seed: u64) -> Result<DatasetShard> {
        if !(spread >= 0.0 && spread.is_finite()) {
            return Err(Error::Config(format!("spread must be >= 0, got {spread}")));
        }
        let mut rng = seed::rng(seed, &[0x626c_6f62]);
        let noise = Normal::new(0.0, 1.0).expect("unit normal");
        let mut samples = Vec::with_capacity(per_class * self.means.len());
        for (label, mean) in self.means.iter().enumerate() {
            for _ in 0..per_class {
                let features = mean
                    .iter()
                    .map(|m| m + spread * noise.sample(&mut rng))
                    .collect();
                samples.push(Sample { features, label });
            }
        }
        DatasetShard::new(samples)
    }
}

pub fn synth_blobs(
    classes: usize,
    dim: usize,
    per_class: usize,
    spread: f64,
    seed: u64,
) -> Result<DatasetShard> {
    BlobGenerator::new(classes, dim, seed)?.sample(per_class, spread, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_counts() {
        let d = synth_blobs(10, 64, 100, 0.5, 1).unwrap();
        assert_eq!(d.len(), 1000);
        assert_eq!(d.dim(), 64);
        assert_eq!(d.class_histogram(10), vec![100; 10]);
    }

    #[test]
    fn zero_spread_collapses_to_means() {
        let g = BlobGenerator::new(3, 4, 9).unwrap();
        let d = g.sample(5, 0.0, 2).unwrap();
        for s in &d.samples {
            assert_eq!(s.features, g.means()[s.label]);
        }
    }

    #[test]
    fn seeds_differ_and_repeat() {
        let a = synth_blobs(3, 4, 5, 0.5, 1).unwrap();
        let b = synth_blobs(3, 4, 5, 0.5, 2).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, synth_blobs(3, 4, 5, 0.5, 1).unwrap());
        assert!(synth_blobs(1, 4, 5, 0.5, 1).is_err());
        assert!(synth_blobs(3, 1, 5, 0.5, 1).is_err());
    }
}
