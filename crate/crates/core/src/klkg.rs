//! KL-KG CMA-ES: dynamic resampling by expected distribution change.
//!
//! Every candidate of a generation is first sampled `n0` times. The remaining
//! per-generation budget goes, one sample at a time, to the candidate with the
//! highest value `V_i = P_i * KL(N(m_i, S_i) || N(m, S))`, where `P_i` is the
//! probability that one more sample moves the candidate across the elite
//! boundary and `(m_i, S_i)` is the distribution the CMA update would produce
//! if it did.
//!
//! The flip probability models the post-sample running mean as Gaussian
//! around the current estimate with the single-sample error divided by
//! `count + 1`, and measures crossing against the midpoint between the mu-th
//! and (mu+1)-th ranked estimates. The hypothetical update swaps the candidate
//! with its neighbor across that boundary.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::cma::{self, CandidateSet, CmaParams, CmaState};
use crate::error::{Error, Result};
use crate::landscapes::Landscape;
use crate::noise::{measure, MeasurementOutcome, NoiseCurve};
use crate::rng::NoiseStreams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlkgConfig {
    pub n0: usize,
    pub n_total: usize,
    pub t_static: f64,
}

impl KlkgConfig {
    pub fn validate(&self, lambda: usize, curve: &NoiseCurve) -> Result<()> {
        if self.n0 < 1 {
            return Err(Error::InvalidConfig("n0 must be at least 1".into()));
        }
        if self.n_total < lambda * self.n0 {
            return Err(Error::InvalidBudget { budget: self.n_total, required: lambda * self.n0 });
        }
        if !(self.t_static >= curve.t_min() && self.t_static <= curve.t_max()) {
            return Err(Error::InvalidConfig(format!(
                "t_static {} outside [{}, {}]",
                self.t_static,
                curve.t_min(),
                curve.t_max()
            )));
        }
        Ok(())
    }
}

/// Running estimate of one candidate's cost.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitnessEstimate {
    pub mean: f64,
    pub count: usize,
    sum: f64,
}

impl FitnessEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut e = Self::default();
        for &s in samples {
            e.add(s);
        }
        e
    }

    pub fn add(&mut self, y: f64) {
        self.sum += y;
        self.count += 1;
        self.mean = self.sum / self.count as f64;
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Closed-form KL divergence `KL(N(m1, s1) || N(m2, s2))` in nats.
pub fn kl_divergence(m1: &DVector<f64>, s1: &DMatrix<f64>, m2: &DVector<f64>, s2: &DMatrix<f64>) -> Result<f64> {
    let n = m1.len();
    if m2.len() != n || s1.shape() != (n, n) || s2.shape() != (n, n) {
        return Err(Error::LengthMismatch { expected: n, actual: m2.len() });
    }
    let c2 = Cholesky::new(s2.clone())
        .ok_or_else(|| Error::NumericalState("second covariance is not positive definite".into()))?;
    let c1 = Cholesky::new(s1.clone())
        .ok_or_else(|| Error::NumericalState("first covariance is not positive definite".into()))?;
    let log_det = |c: &Cholesky<f64, nalgebra::Dyn>| 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let trace = c2.solve(s1).trace();
    let diff = m2 - m1;
    let quad = diff.dot(&c2.solve(&diff));
    Ok(0.5 * (trace + quad - n as f64 + log_det(&c2) - log_det(&c1)))
}

fn ranking(estimates: &[FitnessEstimate]) -> Vec<usize> {
    let means: Vec<f64> = estimates.iter().map(|e| e.mean).collect();
    cma::rank_order(&means)
}

/// Probability that one more sample of candidate `i` moves it across the
/// elite boundary. `eps` is the single-sample relative error.
pub fn elite_flip_probability(estimates: &[FitnessEstimate], i: usize, mu: usize, eps: f64) -> Result<f64> {
    let lambda = estimates.len();
    if mu == 0 || mu >= lambda {
        return Err(Error::DegenerateElite { mu, lambda });
    }
    if i >= lambda {
        return Err(Error::LengthMismatch { expected: lambda, actual: i + 1 });
    }
    let order = ranking(estimates);
    let boundary = 0.5 * (estimates[order[mu - 1]].mean + estimates[order[mu]].mean);
    let est = estimates[i];
    let rank = order.iter().position(|&k| k == i).unwrap();
    let sd = eps * est.mean.abs() / (est.count + 1) as f64;
    if est.mean == boundary {
        return Ok(0.5);
    }
    if !(sd > 0.0) {
        return Ok(0.0);
    }
    let z = (boundary - est.mean) / sd;
    Ok(if rank < mu { normal_cdf(-z) } else { normal_cdf(z) })
}

/// Ranking that results when candidate `i` trades places with its neighbor
/// across the elite boundary.
fn flipped_order(order: &[usize], i: usize, mu: usize) -> Vec<usize> {
    let rank = order.iter().position(|&k| k == i).unwrap();
    let partner = if rank < mu { mu } else { mu - 1 };
    let mut flipped = order.to_vec();
    flipped.swap(rank, partner);
    flipped
}

fn distribution(state: &CmaState) -> (DVector<f64>, DMatrix<f64>) {
    (state.mean.clone(), &state.cov * (state.sigma * state.sigma))
}

/// Value of sampling candidate `i` once more.
pub fn sampling_value(
    i: usize,
    state: &CmaState,
    params: &CmaParams,
    candidates: &CandidateSet,
    estimates: &[FitnessEstimate],
    eps: f64,
) -> Result<f64> {
    let p = elite_flip_probability(estimates, i, params.mu, eps)?;
    if p == 0.0 {
        return Ok(0.0);
    }
    let order = ranking(estimates);
    let (m, s) = distribution(&cma::update_ranked(state, params, candidates, &order)?);
    let (mi, si) = distribution(&cma::update_ranked(state, params, candidates, &flipped_order(&order, i, params.mu))?);
    let kl = kl_divergence(&mi, &si, &m, &s)?.max(0.0);
    Ok(p * kl)
}

/// One measured sample of a candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlkgSample {
    pub candidate: usize,
    pub outcome: MeasurementOutcome,
}

#[derive(Debug, Clone)]
pub struct KlkgGeneration {
    pub next: CmaState,
    pub candidates: CandidateSet,
    pub estimates: Vec<FitnessEstimate>,
    /// Samples in measurement order.
    pub samples: Vec<KlkgSample>,
    /// Candidates chosen after the initial pass, in order.
    pub extra_allocations: Vec<usize>,
}

/// Runs one KL-KG generation. The simulator measures with `true_curve`;
/// allocation decisions use `model_curve`.
#[allow(clippy::too_many_arguments)]
pub fn run_klkg_generation<R: Rng + ?Sized>(
    state: &CmaState,
    params: &CmaParams,
    config: &KlkgConfig,
    landscape: &Landscape,
    true_curve: &NoiseCurve,
    model_curve: &NoiseCurve,
    sampling_rng: &mut R,
    noise: &mut NoiseStreams,
) -> Result<KlkgGeneration> {
    config.validate(params.lambda, true_curve)?;
    let candidates = cma::ask(state, params, sampling_rng)?;
    let units: Vec<Vec<f64>> = candidates.points.iter().map(|p| p.iter().copied().collect()).collect();
    let mut estimates = vec![FitnessEstimate::default(); params.lambda];
    let mut samples = Vec::with_capacity(config.n_total);

    let mut take = |i: usize, estimates: &mut Vec<FitnessEstimate>, samples: &mut Vec<KlkgSample>| -> Result<()> {
        let outcome = measure(landscape, &units[i], config.t_static, true_curve, &mut noise.next_rng())?;
        estimates[i].add(outcome.y_noisy);
        samples.push(KlkgSample { candidate: i, outcome });
        Ok(())
    };

    for i in 0..params.lambda {
        for _ in 0..config.n0 {
            take(i, &mut estimates, &mut samples)?;
        }
    }

    let eps = model_curve.epsilon_of(config.t_static);
    let mut remaining = config.n_total - params.lambda * config.n0;
    let mut extra_allocations = Vec::with_capacity(remaining);
    while remaining > 0 {
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..params.lambda {
            let v = sampling_value(i, state, params, &candidates, &estimates, eps)?;
            if v > best.1 {
                best = (i, v);
            }
        }
        take(best.0, &mut estimates, &mut samples)?;
        extra_allocations.push(best.0);
        remaining -= 1;
    }

    let means: Vec<f64> = estimates.iter().map(|e| e.mean).collect();
    let next = cma::update(state, params, &candidates, &means)?;
    Ok(KlkgGeneration { next, candidates, estimates, samples, extra_allocations })
}
