//! Adaptive sampling CMA-ES for optimization under time-dependent
//! measurement noise.
//!
//! [`adaptive`] chooses a sample time per candidate so that neighbouring
//! candidates can still be told apart; [`cma`] is the underlying evolution
//! strategy. [`klkg`] is a resampling baseline, [`landscapes`] and [`noise`]
//! simulate the system under test, and [`harness`] runs and scores
//! experiments.

pub mod adaptive;
pub mod cma;
pub mod error;
pub mod harness;
pub mod klkg;
pub mod landscapes;
pub mod metrics;
pub mod noise;
pub mod rng;
pub mod trace;

pub use adaptive::{AsCmaConfig, AsCmaState};
pub use cma::{CandidateSet, CmaParams, CmaState};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, ResultsStore, StrategySpec};
pub use klkg::KlkgConfig;
pub use landscapes::Landscape;
pub use noise::NoiseCurve;
pub use trace::{EvaluationRecord, GenerationSummary, RunTrace};
