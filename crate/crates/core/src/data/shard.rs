use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ClientId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

/// A client's (or a test split's) labelled samples.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetShard {
    pub samples: Vec<Sample>,
    pub owner: Option<ClientId>,
}

impl DatasetShard {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let shard = DatasetShard {
            samples,
            owner: None,
        };
        shard.validate()?;
        Ok(shard)
    }

    pub fn with_owner(mut self, owner: ClientId) -> Self {
        self.owner = Some(owner);
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Feature dimension, or 0 for an empty shard.
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    /// One past the largest label present.
    pub fn class_count(&self) -> usize {
        self.samples.iter().map(|s| s.label + 1).max().unwrap_or(0)
    }

    pub fn class_histogram(&self, classes: usize) -> Vec<usize> {
        let mut hist = vec![0; classes];
        for s in &self.samples {
            if s.label < classes {
                hist[s.label] += 1;
            }
        }
        hist
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if let Some(bad) = self.samples.iter().position(|s| s.features.len() != dim) {
            return Err(Error::Shape(format!(
                "sample {bad} has {} features, expected {dim}",
                self.samples[bad].features.len()
            )));
        }
        Ok(())
    }
}
