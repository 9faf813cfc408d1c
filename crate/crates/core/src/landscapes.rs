//! Ground-truth cost landscapes.
//!
//! Each landscape carries its native bounds and known optimum. The optimizer
//! works in the unit cube; [`Landscape::to_unit`] and [`Landscape::from_unit`]
//! map between the two.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type CostFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Registry names accepted by [`Landscape::by_name`].
pub const LANDSCAPE_NAMES: [&str; 4] = ["ankle4", "rosenbrock4", "levy4", "sphere20"];

/// Ankle optimum: upper torque and peak-time bounds, rise time 0.2, lower
/// fall-time bound. See `examples/ankle_optimum.rs` for the grid search.
pub const ANKLE_X_STAR: [f64; 4] = [1.0, 0.55, 0.2, 0.05];

#[derive(Clone)]
pub struct Landscape {
    name: String,
    bounds: Vec<(f64, f64)>,
    cost: CostFn,
    x_star: Vec<f64>,
    y_star: f64,
}

impl fmt::Debug for Landscape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Landscape")
            .field("name", &self.name)
            .field("bounds", &self.bounds)
            .field("x_star", &self.x_star)
            .field("y_star", &self.y_star)
            .finish()
    }
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    100.0
        + x.windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum::<f64>()
}

pub fn sphere(x: &[f64]) -> f64 {
    0.67 + x.iter().map(|v| v * v).sum::<f64>()
}

pub fn levy(x: &[f64]) -> f64 {
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let n = w.len();
    let head = (PI * w[0]).sin().powi(2);
    let body: f64 = w[..n - 1]
        .iter()
        .map(|wi| (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2)))
        .sum();
    let wn = w[n - 1];
    let tail = (wn - 1.0).powi(2) * (1.0 + (2.0 * PI * wn).sin().powi(2));
    head + body + tail + 10.0
}

pub fn ankle(x: &[f64]) -> f64 {
    1.0 + 0.95 * ((-x[0]).exp() - 1.0) + (x[1] - 1.0).powi(2) + 0.1 * (x[2] - 0.2).powi(2) + x[3] * x[3]
}

impl Landscape {
    /// User-defined landscape.
    pub fn custom(
        name: impl Into<String>,
        bounds: Vec<(f64, f64)>,
        cost: CostFn,
        x_star: Vec<f64>,
        y_star: f64,
    ) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        if bounds.iter().any(|&(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidConfig("landscape bounds must satisfy min < max".into()));
        }
        if x_star.len() != bounds.len() {
            return Err(Error::LengthMismatch { expected: bounds.len(), actual: x_star.len() });
        }
        Ok(Self { name: name.into(), bounds, cost, x_star, y_star })
    }

    pub fn rosenbrock4() -> Self {
        Self::builtin("rosenbrock4", vec![(-5.12, 5.12); 4], rosenbrock, vec![1.0; 4], 100.0)
    }

    pub fn levy4() -> Self {
        Self::builtin("levy4", vec![(-10.0, 10.0); 4], levy, vec![1.0; 4], 10.0)
    }

    pub fn sphere20() -> Self {
        Self::builtin("sphere20", vec![(0.0, 1.0); 20], sphere, vec![0.0; 20], 0.67)
    }

    pub fn ankle4() -> Self {
        let bounds = vec![(0.0, 1.0), (0.1, 0.55), (0.1, 0.4), (0.05, 0.2)];
        let y_star = ankle(&ANKLE_X_STAR);
        Self::builtin("ankle4", bounds, ankle, ANKLE_X_STAR.to_vec(), y_star)
    }

    fn builtin(name: &str, bounds: Vec<(f64, f64)>, f: fn(&[f64]) -> f64, x_star: Vec<f64>, y_star: f64) -> Self {
        Self { name: name.into(), bounds, cost: Arc::new(f), x_star, y_star }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "ankle4" => Ok(Self::ankle4()),
            "rosenbrock4" => Ok(Self::rosenbrock4()),
            "levy4" => Ok(Self::levy4()),
            "sphere20" => Ok(Self::sphere20()),
            other => Err(Error::UnknownLandscape(other.to_string())),
        }
    }

    /// Same landscape with every cost multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidConfig(format!("cost scale must be positive, got {factor}")));
        }
        if factor == 1.0 {
            return Ok(self.clone());
        }
        let inner = self.cost.clone();
        Ok(Self {
            name: format!("{}x{}", self.name, factor),
            bounds: self.bounds.clone(),
            cost: Arc::new(move |x| factor * inner(x)),
            x_star: self.x_star.clone(),
            y_star: factor * self.y_star,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn true_optimum(&self) -> (&[f64], f64) {
        (&self.x_star, self.y_star)
    }

    pub fn y_star(&self) -> f64 {
        self.y_star
    }

    fn check(&self, x: &[f64], bounds: impl Iterator<Item = (f64, f64)>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::LengthMismatch { expected: self.dim(), actual: x.len() });
        }
        for (dim, (&value, (lo, hi))) in x.iter().zip(bounds).enumerate() {
            if !(value >= lo && value <= hi) {
                return Err(Error::OutOfBounds { dim, value, lo, hi });
            }
        }
        Ok(())
    }

    /// Cost at native coordinates.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check(x, self.bounds.iter().copied())?;
        let y = (self.cost)(x);
        if !y.is_finite() {
            return Err(Error::LandscapeEvaluation { landscape: self.name.clone() });
        }
        Ok(y)
    }

    /// Cost at unit-cube coordinates.
    pub fn evaluate_unit(&self, u: &[f64]) -> Result<f64> {
        self.evaluate(&self.from_unit(u)?)
    }

    pub fn to_unit(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x, self.bounds.iter().copied())?;
        Ok(x.iter().zip(&self.bounds).map(|(v, (lo, hi))| (v - lo) / (hi - lo)).collect())
    }

    pub fn from_unit(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u, std::iter::repeat((0.0, 1.0)))?;
        Ok(u.iter()
            .zip(&self.bounds)
            .map(|(v, (lo, hi))| (lo + v * (hi - lo)).clamp(*lo, *hi))
            .collect())
    }
}
