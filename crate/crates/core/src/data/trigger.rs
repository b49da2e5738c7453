use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::DatasetShard;
use crate::error::{Error, Result};
use crate::seed;

/// Pixel-pattern backdoor trigger, optionally split into contiguous
/// fragments for distributed (DBA-style) poisoning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerPattern {
    pub pixel_indices: Vec<usize>,
    pub pixel_value: f64,
    pub target_label: usize,
    #[serde(default = "one")]
    pub fragment_count: usize,
}

fn one() -> usize {
    1
}

/// Which part of a trigger to stamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fragment {
    All,
    Part(usize),
}

impl TriggerPattern {
    /// Four 3-pixel bars near the top-left corner of a `width`-wide image:
    /// rows 0 and 2, columns 0..3 and 4..7.
    pub fn corner(width: usize, pixel_value: f64, target_label: usize) -> Self {
        let mut pixel_indices = Vec::with_capacity(12);
        for row in [0, 2] {
            for col0 in [0, 4] {
                pixel_indices.extend((col0..col0 + 3).map(|c| row * width + c));
            }
        }
        TriggerPattern {
            pixel_indices,
            pixel_value,
            target_label,
            fragment_count: 4,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if let Some(&bad) = self.pixel_indices.iter().find(|&&i| i >= dim) {
            return Err(Error::Config(format!(
                "trigger index {bad} outside dimension {dim}"
            )));
        }
        if self.fragment_count == 0 || self.fragment_count > self.pixel_indices.len() {
            return Err(Error::Config(format!(
                "fragment_count {} must be in 1..={}",
                self.fragment_count,
                self.pixel_indices.len()
            )));
        }
        Ok(())
    }

    /// The pixel indices of fragment `part`: `fragment_count` contiguous
    /// chunks, the first `len % fragment_count` one element longer.
    pub fn fragment(&self, part: usize) -> &[usize] {
        let n = self.pixel_indices.len();
        let k = self.fragment_count.max(1);
        let base = n / k;
        let extra = n % k;
        let start = part * base + part.min(extra);
        let len = base + usize::from(part < extra);
        &self.pixel_indices[start.min(n)..(start + len).min(n)]
    }

    pub fn indices(&self, fragment: Fragment) -> Result<&[usize]> {
        match fragment {
            Fragment::All => Ok(&self.pixel_indices),
            Fragment::Part(p) if p < self.fragment_count => Ok(self.fragment(p)),
            Fragment::Part(p) => Err(Error::Config(format!(
                "fragment {p} out of range for {} fragments",
                self.fragment_count
            ))),
        }
    }

    pub fn stamp(&self, features: &mut [f64], fragment: Fragment) -> Result<()> {
        for &i in self.indices(fragment)? {
            features[i] = self.pixel_value;
        }
        Ok(())
    }
}

fn poisoned_count(n: usize, pdr: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&pdr) {
        return Err(Error::Config(format!("pdr must be in [0, 1], got {pdr}")));
    }
    Ok(((pdr * n as f64).round() as usize).min(n))
}

/// Stamps the trigger (or one fragment) onto exactly `round(pdr * |shard|)`
/// randomly chosen samples and relabels them to the target.
pub fn poison_shard(
    shard: &DatasetShard,
    trigger: &TriggerPattern,
    pdr: f64,
    fragment: Fragment,
    seed: u64,
) -> Result<DatasetShard> {
    if !shard.is_empty() {
        trigger.validate(shard.dim())?;
    }
    trigger.indices(fragment)?;
    let count = poisoned_count(shard.len(), pdr)?;
    let mut out = shard.clone();
    let mut rng = seed::rng(seed, &[0x706f_6973]);
    for i in index::sample(&mut rng, shard.len(), count) {
        let s = &mut out.samples[i];
        trigger.stamp(&mut s.features, fragment)?;
        s.label = trigger.target_label;
    }
    Ok(out)
}

/// Relabels exactly `round(pdr * |shard|)` random samples to `target`,
/// leaving features untouched.
pub fn flip_labels(
    shard: &DatasetShard,
    target: usize,
    pdr: f64,
    seed: u64,
) -> Result<DatasetShard> {
    let count = poisoned_count(shard.len(), pdr)?;
    let mut out = shard.clone();
    let mut rng = seed::rng(seed, &[0x666c_6970]);
    for i in index::sample(&mut rng, shard.len(), count) {
        out.samples[i].label = target;
    }
    Ok(out)
}

/// Test set for backdoor accuracy: every sample whose true label differs from
/// the target, stamped with the full trigger and labelled as the target.
pub fn backdoor_testset(clean: &DatasetShard, trigger: &TriggerPattern) -> Result<DatasetShard> {
    trigger.validate(clean.dim())?;
    let mut samples = Vec::new();
    for s in clean
        .samples
        .iter()
        .filter(|s| s.label != trigger.target_label)
    {
        let mut s = s.clone();
        trigger.stamp(&mut s.features, Fragment::All)?;
        s.label = trigger.target_label;
        samples.push(s);
    }
    Ok(DatasetShard {
        samples,
        owner: clean.owner,
    })
}
