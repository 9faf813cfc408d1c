//! Experiment configuration files.
//!
//! Configs are JSON. Only `landscape` and `strategy` are required; every other
//! field falls back to a landscape-dependent default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaptive::{AsCmaConfig, DEFAULT_BETA};
use crate::cma::DEFAULT_SIGMA0;
use crate::error::{Error, Result};
use crate::klkg::KlkgConfig;
use crate::landscapes::Landscape;
use crate::metrics::ConvergenceReference;
use crate::noise::NoiseCurve;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StrategySpec {
    /// Every candidate measured for the same time.
    Static { t_static: f64 },
    /// Adaptive sample times. Missing cost estimates use landscape defaults.
    Ascma {
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y_hat_max: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y_hat_min: Option<f64>,
    },
    Klkg {
        #[serde(default = "default_n0")]
        n0: usize,
        #[serde(default = "default_n_total")]
        n_total: usize,
        t_static: f64,
    },
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_n0() -> usize {
    1
}
fn default_n_total() -> usize {
    20
}

impl StrategySpec {
    pub fn ascma() -> Self {
        StrategySpec::Ascma { beta: DEFAULT_BETA, y_hat_max: None, y_hat_min: None }
    }

    pub fn default_label(&self) -> String {
        match self {
            StrategySpec::Static { t_static } => format!("static-{t_static}"),
            StrategySpec::Ascma { .. } => "ascma".to_string(),
            StrategySpec::Klkg { t_static, .. } => format!("klkg-{t_static}"),
        }
    }

    pub fn is_ascma(&self) -> bool {
        matches!(self, StrategySpec::Ascma { .. })
    }

    pub fn is_static(&self) -> bool {
        matches!(self, StrategySpec::Static { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum InitMode {
    UniformRandom,
    /// Start point in unit coordinates.
    FixedPoint { point: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub landscape: String,
    pub strategy: StrategySpec,
    #[serde(default)]
    pub noise: NoiseCurve,
    /// Noise curve the optimizer believes in, when it differs from `noise`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_noise: Option<NoiseCurve>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_minutes: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitMode>,
    #[serde(default = "default_sigma0")]
    pub sigma0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Multiplies every landscape cost (and default cost estimates).
    #[serde(default = "default_scale")]
    pub cost_scale: f64,
    #[serde(default)]
    pub convergence_reference: ConvergenceReference,
}

fn default_runs() -> usize {
    1
}
fn default_sigma0() -> f64 {
    DEFAULT_SIGMA0
}
fn default_scale() -> f64 {
    1.0
}

/// `(y_hat_min, y_hat_max)` for the built-in landscapes.
pub fn default_cost_estimates(landscape: &str) -> Option<(f64, f64)> {
    match landscape {
        "ankle4" | "sphere20" => Some((0.6, 1.3)),
        "rosenbrock4" => Some((0.0, 1000.0)),
        "levy4" => Some((0.0, 250.0)),
        _ => None,
    }
}

/// Simulated-minute budget per run.
pub fn default_budget(landscape: &str) -> f64 {
    match landscape {
        "sphere20" => 1500.0,
        _ => 600.0,
    }
}

impl ExperimentConfig {
    pub fn new(landscape: impl Into<String>, strategy: StrategySpec) -> Self {
        Self {
            label: None,
            landscape: landscape.into(),
            strategy,
            noise: NoiseCurve::default(),
            model_noise: None,
            runs: 1,
            seed_base: 0,
            budget_minutes: None,
            init: None,
            sigma0: DEFAULT_SIGMA0,
            output: None,
            cost_scale: 1.0,
            convergence_reference: ConvergenceReference::default(),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.strategy.default_label())
    }

    pub fn landscape(&self) -> Result<Landscape> {
        Landscape::by_name(&self.landscape)?.scaled(self.cost_scale)
    }

    pub fn budget(&self) -> f64 {
        self.budget_minutes.unwrap_or_else(|| default_budget(&self.landscape))
    }

    pub fn init_mode(&self) -> InitMode {
        match &self.init {
            Some(mode) => mode.clone(),
            None if self.landscape == "ankle4" => InitMode::FixedPoint { point: vec![0.5; 4] },
            None => InitMode::UniformRandom,
        }
    }

    pub fn model_curve(&self) -> &NoiseCurve {
        self.model_noise.as_ref().unwrap_or(&self.noise)
    }

    /// AS-CMA settings with landscape defaults filled in.
    pub fn ascma_config(&self) -> Result<Option<AsCmaConfig>> {
        let StrategySpec::Ascma { beta, y_hat_max, y_hat_min } = &self.strategy else {
            return Ok(None);
        };
        let defaults = default_cost_estimates(&self.landscape).map(|(lo, hi)| (lo * self.cost_scale, hi * self.cost_scale));
        let (lo, hi) = match (y_hat_min, y_hat_max, defaults) {
            (Some(lo), Some(hi), _) => (*lo, *hi),
            (lo, hi, Some((dlo, dhi))) => (lo.unwrap_or(dlo), hi.unwrap_or(dhi)),
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "landscape `{}` has no default cost estimates; set y_hat_min and y_hat_max",
                    self.landscape
                )))
            }
        };
        let cfg = AsCmaConfig { beta: *beta, y_hat_max: hi, y_hat_min: lo };
        cfg.validate()?;
        Ok(Some(cfg))
    }

    pub fn validate(&self) -> Result<()> {
        let landscape = self.landscape()?;
        let budget = self.budget();
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(Error::InvalidConfig(format!("budget must be positive, got {budget}")));
        }
        if self.runs < 1 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma0 must be positive, got {}", self.sigma0)));
        }
        let in_curve = |t: f64| t >= self.noise.t_min() && t <= self.noise.t_max();
        match &self.strategy {
            StrategySpec::Static { t_static } if !in_curve(*t_static) => {
                return Err(Error::InvalidConfig(format!("t_static {t_static} outside the noise curve bounds")));
            }
            StrategySpec::Klkg { n0, n_total, t_static } => {
                let lambda = crate::cma::CmaParams::for_dimension(landscape.dim())?.lambda;
                KlkgConfig { n0: *n0, n_total: *n_total, t_static: *t_static }.validate(lambda, &self.noise)?;
            }
            _ => {}
        }
        self.ascma_config()?;
        if let InitMode::FixedPoint { point } = self.init_mode() {
            if point.len() != landscape.dim() || point.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidConfig("fixed start point must be a unit-cube point of the landscape's dimension".into()));
            }
        }
        Ok(())
    }
}

/// Inclusive grid of static sample times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticGrid {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl Default for StaticGrid {
    fn default() -> Self {
        Self { from: 0.5, to: 5.5, step: 0.5 }
    }
}

impl StaticGrid {
    pub fn times(&self) -> Vec<f64> {
        let n = ((self.to - self.from) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| ((self.from + i as f64 * self.step) * 1e9).round() / 1e9).collect()
    }
}

/// A sweep: one base experiment replicated across strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    #[serde(default)]
    pub strategies: Vec<StrategySpec>,
    /// Adds one static strategy per grid time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub static_grid: Option<StaticGrid>,
    /// Adds the base strategy when true.
    #[serde(default = "default_true")]
    pub include_base: bool,
}

fn default_true() -> bool {
    true
}

impl SweepConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }

    /// Ankle-style comparison: AS-CMA plus the default static grid.
    pub fn static_comparison(base: ExperimentConfig) -> Self {
        Self { base, strategies: Vec::new(), static_grid: Some(StaticGrid::default()), include_base: true }
    }

    pub fn expand(&self) -> Result<Vec<ExperimentConfig>> {
        let mut out = Vec::new();
        if self.include_base {
            out.push(self.base.clone());
        }
        let mut specs = self.strategies.clone();
        if let Some(grid) = self.static_grid {
            specs.extend(grid.times().into_iter().map(|t_static| StrategySpec::Static { t_static }));
        }
        for spec in specs {
            let mut cfg = self.base.clone();
            cfg.label = None;
            cfg.strategy = spec;
            out.push(cfg);
        }
        let mut labels: Vec<String> = out.iter().map(|c| c.label()).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("sweep contains duplicate strategy labels".into()));
        }
        for c in &out {
            c.validate()?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbTarget {
    /// Both cost estimates.
    YHat,
    /// Every value of the optimizer's noise model.
    NoiseCurve,
}

impl PerturbTarget {
    pub fn tag(&self) -> &'static str {
        match self {
            PerturbTarget::YHat => "y_hat",
            PerturbTarget::NoiseCurve => "noise_curve",
        }
    }
}

pub const DEFAULT_PERTURBATIONS: [f64; 5] = [0.0, 0.10, -0.10, 0.25, -0.25];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbConfig {
    pub base: ExperimentConfig,
    #[serde(default = "default_targets")]
    pub targets: Vec<PerturbTarget>,
    #[serde(default = "default_errors")]
    pub errors: Vec<f64>,
}

fn default_targets() -> Vec<PerturbTarget> {
    vec![PerturbTarget::YHat, PerturbTarget::NoiseCurve]
}
fn default_errors() -> Vec<f64> {
    DEFAULT_PERTURBATIONS.to_vec()
}

impl PerturbConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }
}
