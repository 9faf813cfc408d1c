//! Adaptive sample-time allocation.
//!
//! Before a generation is measured, each candidate's distance to its nearest
//! generation-mate is turned into an expected cost gap via the local slope
//! estimate `k_avg`. The tolerated relative error is then the value that keeps
//! the gap-to-noise ratio of the pairwise comparison at `beta`, and the noise
//! curve is inverted to find the sample time delivering that error. After the
//! generation is ranked, `y_avg` and `k_avg` are re-estimated from the
//! measured costs.

use serde::{Deserialize, Serialize};

use crate::cma::CandidateSet;
use crate::error::{Error, Result};
use crate::noise::NoiseCurve;

pub const DEFAULT_BETA: f64 = 1.3;
pub const K_FLOOR: f64 = 1e-9;
pub const Y_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsCmaConfig {
    pub beta: f64,
    pub y_hat_max: f64,
    pub y_hat_min: f64,
}

impl AsCmaConfig {
    pub fn new(y_hat_min: f64, y_hat_max: f64) -> Self {
        Self { beta: DEFAULT_BETA, y_hat_max, y_hat_min }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.y_hat_max > self.y_hat_min) || !self.y_hat_max.is_finite() || !self.y_hat_min.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "y_hat_max ({}) must exceed y_hat_min ({})",
                self.y_hat_max, self.y_hat_min
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsCmaState {
    pub d_max: f64,
    pub k_avg: f64,
    pub y_avg: f64,
}

/// Per-candidate outcome of the allocation step.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub nearest: Vec<f64>,
    pub target_eps: Vec<f64>,
    pub times: Vec<f64>,
}

pub fn init_ascma(bounds: &[(f64, f64)], config: &AsCmaConfig) -> Result<AsCmaState> {
    config.validate()?;
    if bounds.is_empty() {
        return Err(Error::InvalidDimension(0));
    }
    if bounds.iter().any(|&(lo, hi)| !(hi > lo)) {
        return Err(Error::InvalidConfig("bounds must be non-degenerate in every dimension".into()));
    }
    let d_max = bounds.iter().map(|(lo, hi)| (hi - lo).powi(2)).sum::<f64>().sqrt();
    let y_avg = ((config.y_hat_max + config.y_hat_min) / 2.0).max(Y_FLOOR);
    let k_avg = ((config.y_hat_max - config.y_hat_min) / (0.5 * d_max)).max(K_FLOOR);
    Ok(AsCmaState { d_max, k_avg, y_avg })
}

/// Unit-cube bounds for `dim` dimensions.
pub fn unit_bounds(dim: usize) -> Vec<(f64, f64)> {
    vec![(0.0, 1.0); dim]
}

/// Distance from each candidate to its closest generation-mate, divided by
/// `d_max`.
pub fn nearest_distances(candidates: &CandidateSet, d_max: f64) -> Result<Vec<f64>> {
    let n = candidates.len();
    if n < 2 {
        return Err(Error::InsufficientPopulation(n));
    }
    let mut nearest = vec![f64::INFINITY; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = (&candidates.points[i] - &candidates.points[j]).norm() / d_max;
            nearest[i] = nearest[i].min(d);
            nearest[j] = nearest[j].min(d);
        }
    }
    Ok(nearest)
}

/// Tolerated relative error for a candidate at normalized neighbor distance
/// `d_nearest`.
pub fn target_epsilon(state: &AsCmaState, beta: f64, d_nearest: f64) -> f64 {
    state.k_avg * d_nearest / (std::f64::consts::SQRT_2 * beta * state.y_avg)
}

pub fn allocate_sample_times(
    candidates: &CandidateSet,
    state: &AsCmaState,
    config: &AsCmaConfig,
    curve: &NoiseCurve,
) -> Result<Allocation> {
    let nearest = nearest_distances(candidates, state.d_max)?;
    let target_eps: Vec<f64> = nearest.iter().map(|&d| target_epsilon(state, config.beta, d)).collect();
    let times = target_eps.iter().map(|&e| curve.time_for_epsilon(e)).collect();
    Ok(Allocation { nearest, target_eps, times })
}

/// Re-estimates `y_avg` and `k_avg` from a measured generation.
///
/// The slope is the least-squares fit through the origin of absolute cost
/// differences against `d_max`-normalized distances over unordered pairs,
/// the same scale [`nearest_distances`] uses.
pub fn update_stats(candidates: &CandidateSet, fitnesses: &[f64], state: &AsCmaState) -> Result<AsCmaState> {
    let n = candidates.len();
    if n < 2 {
        return Err(Error::InsufficientPopulation(n));
    }
    if fitnesses.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: fitnesses.len() });
    }
    if let Some((index, &value)) = fitnesses.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidFitness { index, value });
    }
    let y_avg = (fitnesses.iter().sum::<f64>() / n as f64).max(Y_FLOOR);

    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let d = (&candidates.points[i] - &candidates.points[j]).norm() / state.d_max;
            num += (fitnesses[i] - fitnesses[j]).abs() * d;
            den += d * d;
        }
    }
    let k_avg = if den > 0.0 { (num / den).max(K_FLOOR) } else { state.k_avg };
    Ok(AsCmaState { d_max: state.d_max, k_avg, y_avg })
}
