use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::AttackSpec;
use crate::data::{load_idx, BlobGenerator, DatasetShard, TriggerPattern};
use crate::defense::{DefenseConfig, DefenseName};
use crate::error::{Error, Result};
use crate::model::{ArchSpec, TrainingConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum DatasetConfig {
    /// Gaussian class clusters; `width` is the image width the default
    /// trigger assumes when the features are read as a `width`-wide image.
    Blobs {
        #[serde(default = "ten")]
        classes: usize,
        #[serde(default = "sixty_four")]
        dim: usize,
        #[serde(default = "train_per_class")]
        train_per_class: usize,
        #[serde(default = "test_per_class")]
        test_per_class: usize,
        #[serde(default = "spread")]
        spread: f64,
        #[serde(default = "eight")]
        width: usize,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        #[serde(default = "twenty_eight")]
        width: usize,
        /// Keep only the first `limit` training samples.
        limit: Option<usize>,
    },
}

fn ten() -> usize {
    10
}
fn sixty_four() -> usize {
    64
}
fn train_per_class() -> usize {
    200
}
fn test_per_class() -> usize {
    100
}
fn spread() -> f64 {
    1.0
}
fn eight() -> usize {
    8
}
fn twenty_eight() -> usize {
    28
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig::Blobs {
            classes: ten(),
            dim: sixty_four(),
            train_per_class: train_per_class(),
            test_per_class: test_per_class(),
            spread: spread(),
            width: eight(),
        }
    }
}

impl DatasetConfig {
    /// `(train, test)` sets.
    pub fn load(&self, seed: u64) -> Result<(DatasetShard, DatasetShard)> {
        match self {
            DatasetConfig::Blobs {
                classes,
                dim,
                train_per_class,
                test_per_class,
                spread,
                ..
            } => {
                let gen =
                    BlobGenerator::new(*classes, *dim, crate::seed::derive(seed, &[0x626c_6f62]))?;
                let train =
                    gen.sample(*train_per_class, *spread, crate::seed::derive(seed, &[1]))?;
                let test = gen.sample(*test_per_class, *spread, crate::seed::derive(seed, &[2]))?;
                Ok((train, test))
            }
            DatasetConfig::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                limit,
                ..
            } => {
                let mut train = load_idx(train_images, train_labels)?;
                if let Some(l) = limit {
                    train.samples.truncate(*l);
                }
                Ok((train, load_idx(test_images, test_labels)?))
            }
        }
    }

    pub fn width(&self) -> usize {
        match self {
            DatasetConfig::Blobs { width, .. } | DatasetConfig::Idx { width, .. } => *width,
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let DatasetConfig::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            ..
        } = self
        {
            for p in [train_images, train_labels, test_images, test_labels] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "hidden")]
    pub hidden: usize,
}

fn hidden() -> usize {
    32
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { hidden: hidden() }
    }
}

/// How the aggregate weights benign clients. Only equal weights are
/// implemented; dataset-size weighting is accepted by the parser and
/// rejected by validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Equal,
    DatasetSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default = "yes")]
    pub jsonl: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Total client population `N`.
    #[serde(default = "twenty")]
    pub clients: usize,
    /// Participation fraction `K`.
    #[serde(default = "half")]
    pub participation: f64,
    /// Rounds `T`.
    #[serde(default = "forty")]
    pub rounds: usize,
    /// Fraction of compromised participants per round.
    #[serde(default)]
    pub pmr: f64,
    #[serde(default = "dirichlet")]
    pub dirichlet_alpha: f64,
    #[serde(default)]
    pub weighting: Weighting,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    pub attack: Option<AttackSpec>,
    /// Trigger used for BA when no attack is configured.
    pub trigger: Option<TriggerPattern>,
    #[serde(default = "no_defense")]
    pub defense: DefenseConfig,
    pub output: Option<OutputConfig>,
}

fn twenty() -> usize {
    20
}
fn half() -> f64 {
    0.5
}
fn forty() -> usize {
    40
}
fn dirichlet() -> f64 {
    0.5
}
fn no_defense() -> DefenseConfig {
    DefenseConfig::named(DefenseName::None)
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative dataset paths resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: ExperimentConfig = toml::from_str(&std::fs::read_to_string(path)?)?;
        if let Some(base) = path.parent() {
            cfg.dataset.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Participants per round: `max(floor(K * N), 1)`.
    pub fn per_round(&self) -> usize {
        ((self.participation * self.clients as f64).floor() as usize).max(1)
    }

    /// Compromised participants per round: `ceil(pmr * n)`.
    pub fn attackers_per_round(&self) -> usize {
        if self.attack.is_none() {
            return 0;
        }
        (self.pmr * self.per_round() as f64 - 1e-9).ceil().max(0.0) as usize
    }

    /// Size of the fixed compromised population: `ceil(pmr * N)`, at least
    /// the per-round count.
    pub fn compromised_population(&self) -> usize {
        if self.attack.is_none() {
            return 0;
        }
        let pop = (self.pmr * self.clients as f64 - 1e-9).ceil().max(0.0) as usize;
        pop.max(self.attackers_per_round()).min(self.clients)
    }

    pub fn trigger(&self) -> TriggerPattern {
        match (&self.attack, &self.trigger) {
            (Some(a), _) => a.trigger.clone(),
            (None, Some(t)) => t.clone(),
            (None, None) => TriggerPattern::corner(self.dataset.width(), 3.0, 2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 {
            return Err(Error::Config("clients must be >= 1".into()));
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(Error::Config(format!(
                "participation must be in (0, 1], got {}",
                self.participation
            )));
        }
        if !(0.0..1.0).contains(&self.pmr) {
            return Err(Error::Config(format!(
                "pmr must be in [0, 1), got {}",
                self.pmr
            )));
        }
        if !(self.dirichlet_alpha > 0.0) {
            return Err(Error::Config(format!(
                "dirichlet_alpha must be > 0, got {}",
                self.dirichlet_alpha
            )));
        }
        if self.weighting != Weighting::Equal {
            return Err(Error::Config(
                "dataset-size weighting is not implemented; use weighting = \"equal\"".into(),
            ));
        }
        if self.model.hidden == 0 {
            return Err(Error::Config("model.hidden must be >= 1".into()));
        }
        self.training.validate()?;
        if let Some(a) = &self.attack {
            a.validate(Some(self.rounds), None)?;
        } else if self.pmr > 0.0 {
            return Err(Error::Config("pmr > 0 needs an [attack] section".into()));
        }
        if self.attackers_per_round() > self.per_round() {
            return Err(Error::Config(
                "more attackers than participants per round".into(),
            ));
        }
        Ok(())
    }

    pub fn arch(&self, input: usize, classes: usize) -> ArchSpec {
        ArchSpec::mlp(input, self.model.hidden, classes)
    }
}
