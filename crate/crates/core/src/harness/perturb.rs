use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, PerturbConfig, PerturbTarget, StrategySpec};
use super::report::{mean_trajectory, time_grid};
use super::sweep::{run_sweep, ResultsStore};
use crate::error::{Error, Result};
use crate::trace::RunTrace;

pub const BASELINE_LABEL: &str = "baseline";

pub fn perturbation_label(target: PerturbTarget, error: f64) -> String {
    if error == 0.0 {
        BASELINE_LABEL.to_string()
    } else {
        format!("{}{:+.2}", target.tag(), error)
    }
}

/// Base config with one AS-CMA input multiplied by `1 + error`. The
/// simulator's own noise curve is never touched.
pub fn perturbed_config(base: &ExperimentConfig, target: PerturbTarget, error: f64) -> Result<ExperimentConfig> {
    let Some(resolved) = base.ascma_config()? else {
        return Err(Error::InvalidStudy(base.strategy.default_label()));
    };
    let factor = 1.0 + error;
    if !(factor > 0.0) {
        return Err(Error::InvalidConfig(format!("error {error} leaves a non-positive factor")));
    }
    let mut cfg = base.clone();
    cfg.label = Some(perturbation_label(target, error));
    cfg.output = None;
    if error != 0.0 {
        match target {
            PerturbTarget::YHat => {
                cfg.strategy = StrategySpec::Ascma {
                    beta: resolved.beta,
                    y_hat_max: Some(resolved.y_hat_max * factor),
                    y_hat_min: Some(resolved.y_hat_min * factor),
                };
            }
            PerturbTarget::NoiseCurve => cfg.model_noise = Some(base.model_curve().scaled(factor)?),
        }
    }
    Ok(cfg)
}

/// Configs of the study: one shared unperturbed baseline, then every
/// nonzero error for every target.
pub fn study_configs(study: &PerturbConfig) -> Result<Vec<ExperimentConfig>> {
    if !study.base.strategy.is_ascma() {
        return Err(Error::InvalidStudy(study.base.strategy.default_label()));
    }
    let mut configs = vec![perturbed_config(&study.base, PerturbTarget::YHat, 0.0)?];
    for &target in &study.targets {
        for &error in study.errors.iter().filter(|e| **e != 0.0) {
            configs.push(perturbed_config(&study.base, target, error)?);
        }
    }
    Ok(configs)
}

pub fn perturbation_study(study: &PerturbConfig, parallel: usize) -> Result<ResultsStore> {
    let configs = study_configs(study)?;
    let store = run_sweep(&configs, parallel)?;
    if let Some(dir) = &study.base.output {
        store.persist(dir)?;
    }
    Ok(store)
}

/// Difference between a perturbed strategy and the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDelta {
    pub label: String,
    /// Largest gap between mean trajectories, relative to the baseline's
    /// value at that time.
    pub max_relative_delta: f64,
    /// `(perturbed - baseline) / baseline` of mean time to coarse convergence.
    pub coarse_time_change: f64,
    pub fine_time_change: f64,
}

pub fn trajectory_deltas(store: &ResultsStore) -> Result<Vec<TrajectoryDelta>> {
    let base = store
        .get(BASELINE_LABEL)
        .filter(|b| b.aggregate.is_some())
        .ok_or_else(|| Error::InsufficientData("store has no baseline runs".into()))?;
    let base_agg = base.aggregate.as_ref().expect("checked above");
    let all: Vec<&RunTrace> = store.strategies.iter().flat_map(|s| s.traces.iter()).collect();
    let grid = time_grid(&all, super::report::TRAJECTORY_POINTS);
    let base_traj = mean_trajectory(&base.traces, &grid);
    let change = |a: f64, b: f64| (a - b) / b;
    Ok(store
        .strategies
        .iter()
        .filter(|s| s.label != BASELINE_LABEL)
        .filter_map(|s| {
            let agg = s.aggregate.as_ref()?;
            let traj = mean_trajectory(&s.traces, &grid);
            let max_relative_delta =
                traj.iter().zip(&base_traj).map(|(p, b)| ((p - b) / b).abs()).fold(0.0, f64::max);
            Some(TrajectoryDelta {
                label: s.label.clone(),
                max_relative_delta,
                coarse_time_change: change(agg.coarse.time_mean, base_agg.coarse.time_mean),
                fine_time_change: change(agg.fine.time_mean, base_agg.fine.time_mean),
            })
        })
        .collect())
}
