use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(usize),

    #[error("numerical state error: {0}")]
    NumericalState(String),

    #[error("invalid fitness at index {index}: {value}")]
    InvalidFitness { index: usize, value: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("population of {0} is too small, need at least 2 candidates")]
    InsufficientPopulation(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("point outside bounds in dimension {dim}: {value} not in [{lo}, {hi}]")]
    OutOfBounds { dim: usize, value: f64, lo: f64, hi: f64 },

    #[error("landscape `{landscape}` returned a non-finite cost")]
    LandscapeEvaluation { landscape: String },

    #[error("unknown landscape `{0}`")]
    UnknownLandscape(String),

    #[error("elite size {mu} must be smaller than population {lambda}")]
    DegenerateElite { mu: usize, lambda: usize },

    #[error("sampling budget {budget} is smaller than the initial pass of {required} samples")]
    InvalidBudget { budget: usize, required: usize },

    #[error("correlation undefined for constant input")]
    UndefinedCorrelation,

    #[error("t-test undefined: pooled variance is zero")]
    DegenerateTest,

    #[error("effect size is zero, required sample size is unbounded")]
    InfiniteSampleSize,

    #[error("no strategy is eligible for selection")]
    NoEligibleStrategy,

    #[error("perturbation study requires an AS-CMA base strategy, got `{0}`")]
    InvalidStudy(String),

    #[error("run {run_id} (seed {seed}) failed: {source}")]
    Run {
        run_id: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format { path: path.into(), message: message.to_string() }
    }

    /// Short machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_) => "invalid_dimension",
            Error::NumericalState(_) => "numerical_state",
            Error::InvalidFitness { .. } => "invalid_fitness",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::InvalidConfig(_) => "invalid_config",
            Error::InsufficientPopulation(_) => "insufficient_population",
            Error::InsufficientData(_) => "insufficient_data",
            Error::OutOfBounds { .. } => "out_of_bounds",
            Error::LandscapeEvaluation { .. } => "landscape_evaluation",
            Error::UnknownLandscape(_) => "unknown_landscape",
            Error::DegenerateElite { .. } => "degenerate_elite",
            Error::InvalidBudget { .. } => "invalid_budget",
            Error::UndefinedCorrelation => "undefined_correlation",
            Error::DegenerateTest => "degenerate_test",
            Error::InfiniteSampleSize => "infinite_sample_size",
            Error::NoEligibleStrategy => "no_eligible_strategy",
            Error::InvalidStudy(_) => "invalid_study",
            Error::Run { .. } => "run_failed",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
        }
    }
}
