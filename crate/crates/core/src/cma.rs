//! CMA-ES engine with an ask-and-tell interface.
//!
//! All search happens in the normalized unit cube. Sampled candidates are
//! clamped coordinatewise to `[0, 1]` and the current mean replaces the last
//! sampled candidate of every generation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative floor applied to covariance eigenvalues after each update.
pub const EIGEN_FLOOR: f64 = 1e-14;

/// Step size used when none is configured.
pub const DEFAULT_SIGMA0: f64 = 0.3;

/// Strategy parameters: population sizes, recombination weights and learning
/// rates.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaParams {
    pub dim: usize,
    pub lambda: usize,
    pub mu: usize,
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    /// Expected norm of a standard normal vector in `dim` dimensions.
    pub chi_n: f64,
}

impl CmaParams {
    /// Default parameters with `lambda = 4 + floor(3 ln dim)`.
    pub fn for_dimension(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        let lambda = 4 + (3.0 * (dim as f64).ln()).floor() as usize;
        Self::with_population(dim, lambda)
    }

    /// Default learning rates for an explicit population size.
    pub fn with_population(dim: usize, lambda: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(dim));
        }
        if lambda < 2 {
            return Err(Error::InsufficientPopulation(lambda));
        }
        let n = dim as f64;
        let mu = lambda / 2;

        let half = (lambda as f64 + 1.0) / 2.0;
        let raw: Vec<f64> = (1..=mu).map(|i| half.ln() - (i as f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let alpha_mu = 2.0;
        let c_mu = (1.0 - c_1)
            .min(alpha_mu * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + alpha_mu * mu_eff / 2.0))
            .max(0.0);
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

        Ok(Self { dim, lambda, mu, weights, mu_eff, c_sigma, d_sigma, c_c, c_1, c_mu, chi_n })
    }
}

/// Search distribution of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaState {
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    pub p_sigma: DVector<f64>,
    pub p_c: DVector<f64>,
    pub generation: usize,
}

impl CmaState {
    pub fn new(mean: DVector<f64>, sigma: f64) -> Result<Self> {
        let n = mean.len();
        if n == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("step size must be positive, got {sigma}")));
        }
        if mean.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig("initial mean must lie in the unit cube".into()));
        }
        Ok(Self {
            mean,
            sigma,
            cov: DMatrix::identity(n, n),
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            generation: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Sampled,
    InjectedMean,
}

/// One generation of candidates in unit coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub points: Vec<DVector<f64>>,
    pub origins: Vec<Origin>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn from_points(points: Vec<DVector<f64>>) -> Self {
        let mut origins = vec![Origin::Sampled; points.len()];
        if let Some(last) = origins.last_mut() {
            *last = Origin::InjectedMean;
        }
        Self { points, origins }
    }
}

struct Eigen {
    basis: DMatrix<f64>,
    values: DVector<f64>,
}

fn decompose(cov: &DMatrix<f64>) -> Result<Eigen> {
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalState("covariance has non-finite entries".into()));
    }
    let eig = SymmetricEigen::new(cov.clone());
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalState("covariance eigendecomposition failed".into()));
    }
    Ok(Eigen { basis: eig.eigenvectors, values: eig.eigenvalues })
}

/// Draws `lambda` candidates; the last one is the current mean.
pub fn ask<R: Rng + ?Sized>(state: &CmaState, params: &CmaParams, rng: &mut R) -> Result<CandidateSet> {
    let n = state.dim();
    let eig = decompose(&state.cov)?;
    let scale = eig.values.map(|v| v.max(0.0).sqrt());
    let mut points = Vec::with_capacity(params.lambda);
    for _ in 0..params.lambda - 1 {
        let z = DVector::<f64>::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let y = &eig.basis * z.component_mul(&scale);
        let x = (&state.mean + y * state.sigma).map(|v| v.clamp(0.0, 1.0));
        points.push(x);
    }
    points.push(state.mean.map(|v| v.clamp(0.0, 1.0)));
    Ok(CandidateSet::from_points(points))
}

/// Indices sorted ascending by fitness; ties keep candidate order.
pub fn rank_order(fitnesses: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitnesses.len()).collect();
    order.sort_by(|&a, &b| fitnesses[a].total_cmp(&fitnesses[b]));
    order
}

/// Tell step: rank by fitness (minimization) and update the distribution.
pub fn update(
    state: &CmaState,
    params: &CmaParams,
    candidates: &CandidateSet,
    fitnesses: &[f64],
) -> Result<CmaState> {
    if fitnesses.len() != candidates.len() {
        return Err(Error::LengthMismatch { expected: candidates.len(), actual: fitnesses.len() });
    }
    if let Some((index, &value)) = fitnesses.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidFitness { index, value });
    }
    update_ranked(state, params, candidates, &rank_order(fitnesses))
}

/// Update using an explicit ranking (`order[0]` is the best candidate).
pub fn update_ranked(
    state: &CmaState,
    params: &CmaParams,
    candidates: &CandidateSet,
    order: &[usize],
) -> Result<CmaState> {
    if candidates.len() != params.lambda {
        return Err(Error::LengthMismatch { expected: params.lambda, actual: candidates.len() });
    }
    if order.len() != candidates.len() {
        return Err(Error::LengthMismatch { expected: candidates.len(), actual: order.len() });
    }
    let n = state.dim();
    let nf = n as f64;
    let sigma = state.sigma;
    let m = &state.mean;

    let steps: Vec<DVector<f64>> = order[..params.mu]
        .iter()
        .map(|&i| (&candidates.points[i] - m) / sigma)
        .collect();

    let mut delta = DVector::zeros(n);
    for (w, &i) in params.weights.iter().zip(&order[..params.mu]) {
        delta += (&candidates.points[i] - m) * *w;
    }
    // Rounding in the weighted sum can push a coordinate a hair outside the cube.
    let mean = (m + &delta).map(|v| v.clamp(0.0, 1.0));
    let y_w = &delta / sigma;

    let eig = decompose(&state.cov)?;
    let inv_sqrt = eig.values.map(|v| 1.0 / v.sqrt());
    let c_inv_sqrt_y = &eig.basis * (eig.basis.transpose() * &y_w).component_mul(&inv_sqrt);

    let cs = params.c_sigma;
    let p_sigma = &state.p_sigma * (1.0 - cs) + c_inv_sqrt_y * (cs * (2.0 - cs) * params.mu_eff).sqrt();
    let ps_norm = p_sigma.norm();
    let new_sigma = sigma * ((cs / params.d_sigma) * (ps_norm / params.chi_n - 1.0)).exp();

    let h_sigma = ps_norm < 1.5 * nf.sqrt();
    let cc = params.c_c;
    let mut p_c = &state.p_c * (1.0 - cc);
    if h_sigma {
        p_c += &y_w * (cc * (2.0 - cc) * params.mu_eff).sqrt();
    }
    let delta_h = if h_sigma { 0.0 } else { cc * (2.0 - cc) };

    let mut rank_mu = DMatrix::zeros(n, n);
    for (w, y) in params.weights.iter().zip(&steps) {
        rank_mu += (y * y.transpose()) * *w;
    }
    let decay = 1.0 + params.c_1 * delta_h - params.c_1 - params.c_mu;
    let mut cov = &state.cov * decay + (&p_c * p_c.transpose()) * params.c_1 + rank_mu * params.c_mu;
    cov = (&cov + cov.transpose()) * 0.5;
    let cov = repair_covariance(cov)?;

    if !(new_sigma.is_finite() && new_sigma > 0.0) {
        return Err(Error::NumericalState(format!("step size became {new_sigma}")));
    }

    Ok(CmaState { mean, sigma: new_sigma, cov, p_sigma, p_c, generation: state.generation + 1 })
}

/// Floors eigenvalues at `EIGEN_FLOOR` times the largest eigenvalue when any
/// of them drops to `EIGEN_FLOOR` or below.
fn repair_covariance(cov: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = decompose(&cov)?;
    let max = eig.values.max();
    if !(max > 0.0) {
        return Err(Error::NumericalState("covariance has no positive eigenvalue".into()));
    }
    if eig.values.min() > EIGEN_FLOOR {
        return Ok(cov);
    }
    let floor = EIGEN_FLOOR * max;
    let values = eig.values.map(|v| if v <= EIGEN_FLOOR { floor.max(v) } else { v });
    let values = values.map(|v| if v <= 0.0 { f64::MIN_POSITIVE } else { v });
    let rebuilt = &eig.basis * DMatrix::from_diagonal(&values) * eig.basis.transpose();
    Ok((&rebuilt + rebuilt.transpose()) * 0.5)
}
