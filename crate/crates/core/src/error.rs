use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Bloch vector {vector:?}: norm {norm} is not within 1e-2 of 1")]
    InvalidBlochVector { vector: [f64; 3], norm: f64 },

    #[error("tensor product of an empty factor list")]
    EmptyProduct,

    #[error("qubit count {n} outside supported range {min}..={max}")]
    QubitCount { n: usize, min: usize, max: usize },

    #[error("noise visibility {0} outside [0, 1]")]
    NoiseVisibility(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("numeric inconsistency: {0}")]
    Numeric(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("invalid inequality: {0}")]
    Inequality(String),

    #[error("invalid strategy: {0}")]
    Strategy(String),

    #[error("search space of 2^{log2_size} candidates exceeds the guard of 2^{log2_guard}; reduce party count or visibility")]
    SearchSpace { log2_size: u32, log2_guard: u32 },

    #[error("power iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("randomness source exhausted after {rounds_completed} completed rounds")]
    RandomnessExhausted { rounds_completed: usize },

    #[error("malformed beacon record at byte offset {offset}: {reason}")]
    BeaconParse { offset: usize, reason: String },

    #[error("beacon fetch failed: {0}")]
    Network(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numeric and convergence failures, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_) | Error::NoConvergence { .. })
    }
}
