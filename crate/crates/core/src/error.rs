use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged in round {round}: non-finite loss")]
    TrainingDiverged { round: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("IDX format error: {0}")]
    Format(String),

    #[error("COF needs at least 3 points, got {0}")]
    InsufficientPoints(usize),

    #[error("invalid neighbourhood size k = {k} for {n} points (need 2 <= k <= n - 1)")]
    InvalidNeighbourhood { k: usize, n: usize },

    #[error("cannot trim {k} values from each end of {n}")]
    OverTrim { k: usize, n: usize },

    #[error("{rule} needs at least {required} submissions for f = {f}, got {n}")]
    TooFewClients {
        rule: &'static str,
        n: usize,
        f: usize,
        required: usize,
    },

    #[error("little-is-enough needs benign statistics for the round")]
    MissingBenignStats,

    #[error("layer {layer}: {source}")]
    Layer {
        layer: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported Paillier modulus size: {0} bits")]
    KeySize(u64),

    #[error("prime search exhausted after {0} candidates")]
    PrimeSearchExhausted(usize),

    #[error("fixed-point overflow: value {0} exceeds codec headroom")]
    Overflow(f64),

    #[error("ragged ciphertext matrix: row {row} has {got} entries, expected {expected}")]
    Ragged {
        row: usize,
        got: usize,
        expected: usize,
    },

    #[error("malformed protocol message: {0}")]
    Message(String),

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn in_layer(self, layer: usize) -> Self {
        Error::Layer {
            layer,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_round(self, round: usize) -> Self {
        Error::Round {
            round,
            source: Box::new(self),
        }
    }
}
