use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("unsupported dimension {0} (expected 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("generator is not Hermitian at s = {s} (max deviation {deviation:.3e})")]
    NotHermitian { s: f64, deviation: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("epsilon profile exceeds the perturbative bound: |eps| = {magnitude:.4} > {bound}")]
    ProfileOutOfBounds { magnitude: f64, bound: f64 },

    #[error("theta = {0} is not on the 16-point grid")]
    OffGrid(f64),

    #[error("propagation step too coarse: {samples_per_period:.2} samples per drive period (need at least {minimum})")]
    StepTooCoarse {
        samples_per_period: f64,
        minimum: f64,
    },

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("records mix n_gates values {0} and {1}")]
    MixedGates(u32, u32),

    #[error("missing angle indices {0:?}")]
    MissingAngles(Vec<i32>),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("schema version mismatch: found {found}, expected {expected}")]
    SchemaMismatch { found: u32, expected: u32 },

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Errors caused by the caller's input rather than the environment.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
