//! Experiment orchestration: single runs, seeded sweeps, the cost and
//! noise-model perturbation study, persistence and reporting.

pub mod config;
pub mod io;
pub mod perturb;
pub mod report;
pub mod run;
pub mod sweep;

pub use config::{
    ExperimentConfig, InitMode, PerturbConfig, PerturbTarget, StaticGrid, StrategySpec, SweepConfig,
    DEFAULT_PERTURBATIONS,
};
pub use perturb::{perturbation_study, trajectory_deltas, TrajectoryDelta};
pub use report::{report, summarize, write_plot_data, Report, SummaryRow};
pub use run::{initial_point, run_single};
pub use sweep::{run_sweep, CellFailure, Provenance, ResultsStore, StrategyResult};
