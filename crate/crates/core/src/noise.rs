//! Time-dependent multiplicative measurement noise.
//!
//! A [`NoiseCurve`] maps sample time to the standard deviation of the
//! relative measurement error. Between anchors the error is interpolated
//! linearly in log space (falling back to linear interpolation when an anchor
//! error is zero) and a constant baseline is added on top.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscapes::Landscape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseCurveSpec", into = "NoiseCurveSpec")]
pub struct NoiseCurve {
    anchors: Vec<(f64, f64)>,
    baseline: f64,
    t_min: f64,
    t_max: f64,
}

/// Serialized form of a [`NoiseCurve`], validated on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct NoiseCurveSpec {
    anchors: Vec<(f64, f64)>,
    #[serde(default)]
    baseline: f64,
    t_min: f64,
    t_max: f64,
}

impl TryFrom<NoiseCurveSpec> for NoiseCurve {
    type Error = Error;

    fn try_from(s: NoiseCurveSpec) -> Result<Self> {
        NoiseCurve::new(s.anchors, s.baseline, s.t_min, s.t_max)
    }
}

impl From<NoiseCurve> for NoiseCurveSpec {
    fn from(c: NoiseCurve) -> Self {
        NoiseCurveSpec { anchors: c.anchors, baseline: c.baseline, t_min: c.t_min, t_max: c.t_max }
    }
}

impl Default for NoiseCurve {
    /// 34.2% error at 0.5 min and 0.4% at 5.5 min plus 3% baseline.
    fn default() -> Self {
        Self::new(vec![(0.5, 0.342), (5.5, 0.004)], 0.03, 0.5, 5.5).expect("default curve is valid")
    }
}

impl NoiseCurve {
    /// Anchors must be strictly increasing in time and non-increasing in
    /// error. Strict decrease of the curve requires strictly decreasing,
    /// positive anchor errors.
    pub fn new(anchors: Vec<(f64, f64)>, baseline: f64, t_min: f64, t_max: f64) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("noise curve: {m}")));
        if anchors.len() < 2 {
            return bad("need at least two anchors");
        }
        if anchors.iter().any(|&(t, e)| !t.is_finite() || !e.is_finite() || e < 0.0) {
            return bad("anchor values must be finite with non-negative error");
        }
        if !anchors.windows(2).all(|w| w[1].0 > w[0].0) {
            return bad("anchor times must be strictly increasing");
        }
        if !anchors.windows(2).all(|w| w[1].1 <= w[0].1) {
            return bad("anchor errors must not increase with time");
        }
        if !(baseline >= 0.0 && baseline.is_finite()) {
            return bad("baseline must be non-negative");
        }
        if !(t_min < t_max) || t_min > anchors[0].0 || t_max < anchors[anchors.len() - 1].0 {
            return bad("clamp bounds must enclose the anchors with t_min < t_max");
        }
        Ok(Self { anchors, baseline, t_min, t_max })
    }

    /// Curve with zero error everywhere.
    pub fn noiseless(t_min: f64, t_max: f64) -> Result<Self> {
        Self::new(vec![(t_min, 0.0), (t_max, 0.0)], 0.0, t_min, t_max)
    }

    pub fn anchors(&self) -> &[(f64, f64)] {
        &self.anchors
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn with_baseline(mut self, baseline: f64) -> Result<Self> {
        if !(baseline >= 0.0 && baseline.is_finite()) {
            return Err(Error::InvalidConfig("noise curve: baseline must be non-negative".into()));
        }
        self.baseline = baseline;
        Ok(self)
    }

    /// Every error value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise curve scale must be positive, got {factor}")));
        }
        let anchors = self.anchors.iter().map(|&(t, e)| (t, e * factor)).collect();
        Self::new(anchors, self.baseline * factor, self.t_min, self.t_max)
    }

    pub fn clamp_time(&self, t: f64) -> f64 {
        t.clamp(self.t_min, self.t_max)
    }

    fn segment(&self, t: f64) -> usize {
        // Extrapolation below the first or above the last anchor reuses the
        // outermost segment.
        let last = self.anchors.len() - 2;
        self.anchors[1..=last].iter().position(|&(ta, _)| t <= ta).unwrap_or(last)
    }

    fn interpolate(&self, k: usize, t: f64) -> f64 {
        let (t0, e0) = self.anchors[k];
        let (t1, e1) = self.anchors[k + 1];
        let u = (t - t0) / (t1 - t0);
        if e0 > 0.0 && e1 > 0.0 {
            (e0.ln() + u * (e1.ln() - e0.ln())).exp()
        } else {
            (e0 + u * (e1 - e0)).max(0.0)
        }
    }

    /// Relative error standard deviation after sampling for `t` minutes.
    pub fn epsilon_of(&self, t: f64) -> f64 {
        let t = self.clamp_time(t);
        self.interpolate(self.segment(t), t) + self.baseline
    }

    /// Sample time whose error best matches `eps`, clamped to the curve
    /// bounds. Flat stretches resolve to their shortest time.
    pub fn time_for_epsilon(&self, eps: f64) -> f64 {
        if eps >= self.epsilon_of(self.t_min) {
            return self.t_min;
        }
        if eps < self.epsilon_of(self.t_max) {
            return self.t_max;
        }
        let target = eps - self.baseline;
        // Breakpoints: t_min, interior anchors, t_max.
        let mut knots = vec![self.t_min];
        knots.extend(self.anchors[1..self.anchors.len() - 1].iter().map(|a| a.0));
        knots.push(self.t_max);
        for w in knots.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let e_hi = self.epsilon_of(hi);
            if eps < e_hi {
                continue;
            }
            let k = self.segment(0.5 * (lo + hi));
            let (t0, e0) = self.anchors[k];
            let (t1, e1) = self.anchors[k + 1];
            let u = if e0 > 0.0 && e1 > 0.0 {
                (target.ln() - e0.ln()) / (e1.ln() - e0.ln())
            } else if e1 != e0 {
                (target - e0) / (e1 - e0)
            } else {
                return lo;
            };
            return (t0 + u * (t1 - t0)).clamp(lo, hi);
        }
        self.t_max
    }
}

/// Result of one simulated measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementOutcome {
    pub y_true: f64,
    pub y_noisy: f64,
    pub t: f64,
    pub epsilon: f64,
}

/// Applies multiplicative noise `y_true * (1 + n)`, `n ~ N(0, eps)`.
pub fn apply_noise<R: Rng + ?Sized>(y_true: f64, eps: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    y_true * (1.0 + eps * z)
}

/// Measures `x` (unit coordinates) for `t` minutes.
pub fn measure<R: Rng + ?Sized>(
    landscape: &Landscape,
    x_unit: &[f64],
    t: f64,
    curve: &NoiseCurve,
    rng: &mut R,
) -> Result<MeasurementOutcome> {
    let y_true = landscape.evaluate_unit(x_unit)?;
    let t = curve.clamp_time(t);
    let epsilon = curve.epsilon_of(t);
    let y_noisy = apply_noise(y_true, epsilon, rng);
    Ok(MeasurementOutcome { y_true, y_noisy, t, epsilon })
}

/// Time series of instantaneous cost estimates from one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    /// Sample timestamps in minutes from trial start.
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Trial {
    /// Evenly spaced samples every `dt` minutes starting at `dt`.
    pub fn uniform(dt: f64, values: Vec<f64>) -> Self {
        let times = (1..=values.len()).map(|i| i as f64 * dt).collect();
        Self { times, values }
    }

    fn window_mean(&self, t: f64) -> Option<f64> {
        let (sum, n) = self
            .times
            .iter()
            .zip(&self.values)
            .take_while(|(ti, _)| **ti <= t + 1e-12)
            .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    fn full_mean(&self) -> Option<f64> {
        (!self.values.is_empty()).then(|| self.values.iter().sum::<f64>() / self.values.len() as f64)
    }
}

/// Pool-adjacent-violators fit of a non-increasing sequence.
fn isotonic_non_increasing(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a >= b {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().unwrap();
            *last = ((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb);
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}

/// Builds a noise curve from trials measured for the full duration.
///
/// For each window the trial's cost over `[0, t]` is compared with the cost
/// over the whole trial; the anchor error is the standard deviation of those
/// relative errors across trials. The fitted curve has zero baseline and
/// spans the window grid.
pub fn fit_noise_curve(trials: &[Trial], windows: &[f64]) -> Result<NoiseCurve> {
    if trials.len() < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 trials, got {}", trials.len())));
    }
    if windows.len() < 2 || !windows.windows(2).all(|w| w[1] > w[0]) || windows[0] <= 0.0 {
        return Err(Error::InvalidConfig("window grid must hold at least two increasing positive times".into()));
    }
    let t_max = windows[windows.len() - 1];
    let mut errors = Vec::with_capacity(windows.len());
    for &w in windows {
        let mut rel = Vec::with_capacity(trials.len());
        for (i, trial) in trials.iter().enumerate() {
            if trial.times.len() != trial.values.len() {
                return Err(Error::InsufficientData(format!("trial {i} has mismatched times and values")));
            }
            if trial.times.last().is_none_or(|&t| t + 1e-12 < t_max) {
                return Err(Error::InsufficientData(format!("trial {i} is shorter than {t_max} minutes")));
            }
            let full = trial.full_mean().unwrap();
            let part = trial
                .window_mean(w)
                .ok_or_else(|| Error::InsufficientData(format!("trial {i} has no samples before {w} minutes")))?;
            if full == 0.0 {
                return Err(Error::InsufficientData(format!("trial {i} has zero mean cost")));
            }
            rel.push((part - full) / full);
        }
        let mean = rel.iter().sum::<f64>() / rel.len() as f64;
        let var = rel.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (rel.len() - 1) as f64;
        errors.push(var.sqrt());
    }
    let errors = isotonic_non_increasing(&errors);
    let anchors = windows.iter().copied().zip(errors).collect();
    NoiseCurve::new(anchors, 0.0, windows[0], t_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Substream};
    use proptest::prelude::*;

    #[test]
    fn default_curve_endpoints() {
        let c = NoiseCurve::default();
        assert!((c.epsilon_of(0.5) - 0.372).abs() < 1e-12);
        assert!((c.epsilon_of(5.5) - 0.034).abs() < 1e-12);
        assert!((c.epsilon_of(0.0) - 0.372).abs() < 1e-12);
        assert!((c.epsilon_of(99.0) - 0.034).abs() < 1e-12);
    }

    #[test]
    fn midpoint_is_geometric_mean_plus_baseline() {
        let c = NoiseCurve::default();
        let expected = (0.5 * (0.342f64.ln() + 0.004f64.ln())).exp() + 0.03;
        assert!((c.epsilon_of(3.0) - expected).abs() < 1e-12);
        assert!((c.epsilon_of(3.0) - ((0.342f64 * 0.004).sqrt() + 0.03)).abs() < 1e-12);
    }

    #[test]
    fn inversion_clamps() {
        let c = NoiseCurve::default();
        assert!((c.time_for_epsilon(0.372) - 0.5).abs() < 1e-12);
        assert_eq!(c.time_for_epsilon(0.0), 5.5);
        assert_eq!(c.time_for_epsilon(1.0), 0.5);
        assert!((c.time_for_epsilon(0.034) - 5.5).abs() < 1e-12);
    }

    #[test]
    fn multi_anchor_curve_is_monotone_and_invertible() {
        let c = NoiseCurve::new(vec![(1.0, 0.3), (2.0, 0.1), (4.0, 0.05), (6.0, 0.0)], 0.01, 0.5, 7.0).unwrap();
        let ts: Vec<f64> = (0..=130).map(|i| 0.5 + i as f64 * 0.05).collect();
        for w in ts.windows(2) {
            assert!(c.epsilon_of(w[1]) <= c.epsilon_of(w[0]));
        }
        for &t in &ts[..ts.len() - 20] {
            let back = c.time_for_epsilon(c.epsilon_of(t));
            assert!((back - t).abs() < 1e-9, "t={t} back={back}");
        }
    }

    #[test]
    fn invalid_curves_rejected() {
        assert!(NoiseCurve::new(vec![(1.0, 0.1)], 0.0, 0.5, 2.0).is_err());
        assert!(NoiseCurve::new(vec![(1.0, 0.1), (1.0, 0.05)], 0.0, 0.5, 2.0).is_err());
        assert!(NoiseCurve::new(vec![(1.0, 0.1), (2.0, 0.2)], 0.0, 0.5, 2.0).is_err());
        assert!(NoiseCurve::new(vec![(1.0, 0.1), (2.0, 0.05)], -0.1, 0.5, 2.0).is_err());
        assert!(NoiseCurve::new(vec![(1.0, 0.1), (2.0, 0.05)], 0.0, 1.5, 2.0).is_err());
        assert!(NoiseCurve::new(vec![(1.0, 0.1), (2.0, 0.05)], 0.0, 0.5, 1.5).is_err());
    }

    #[test]
    fn json_round_trip_validates() {
        let c = NoiseCurve::default();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<NoiseCurve>(&s).unwrap(), c);
        let bad = r#"{"anchors":[[1.0,0.1],[2.0,0.3]],"baseline":0.0,"t_min":0.5,"t_max":2.0}"#;
        assert!(serde_json::from_str::<NoiseCurve>(bad).is_err());
    }

    #[test]
    fn noiseless_measurement_is_exact() {
        let l = Landscape::by_name("ankle4").unwrap();
        let c = NoiseCurve::noiseless(0.5, 5.5).unwrap();
        let x = [0.3, 0.4, 0.5, 0.6];
        let m = measure(&l, &x, 2.0, &c, &mut substream(1, Substream::Noise, 0)).unwrap();
        assert_eq!(m.y_noisy, m.y_true);
        assert_eq!(m.epsilon, 0.0);
    }

    #[test]
    fn measurement_is_unbiased_with_expected_spread() {
        let l = Landscape::by_name("rosenbrock4").unwrap();
        let c = NoiseCurve::default();
        let x = [0.6, 0.55, 0.52, 0.58];
        let t = 1.5;
        let n = 100_000;
        let mut rng = substream(5, Substream::Noise, 0);
        let ys: Vec<f64> = (0..n).map(|_| measure(&l, &x, t, &c, &mut rng).unwrap().y_noisy).collect();
        let y_true = l.evaluate_unit(&x).unwrap();
        let mean = ys.iter().sum::<f64>() / n as f64;
        let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let se = sd / (n as f64).sqrt();
        assert!((mean - y_true).abs() < 3.0 * se);
        let rel = sd / y_true / c.epsilon_of(t);
        assert!((rel - 1.0).abs() < 0.02, "relative spread {rel}");
    }

    #[test]
    fn fit_requires_two_trials() {
        let t = Trial::uniform(0.1, vec![1.0; 60]);
        assert!(matches!(fit_noise_curve(&[t], &[1.0, 6.0]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn constant_trials_fit_zero_error() {
        let trials = vec![Trial::uniform(0.1, vec![2.0; 60]), Trial::uniform(0.1, vec![3.5; 60])];
        let c = fit_noise_curve(&trials, &[0.5, 1.0, 3.0, 6.0]).unwrap();
        assert!(c.anchors().iter().all(|&(_, e)| e == 0.0));
    }

    #[test]
    fn white_noise_fit_follows_central_limit() {
        // Reference estimate is the whole 6-minute trial (600 samples), so the
        // window error has standard deviation sigma * sqrt(1/n - 1/N) / mean.
        let mean = 5.0;
        let sigma_w = 1.0;
        let dt = 0.01;
        let total = 600;
        let mut rng = substream(42, Substream::Noise, 0);
        let trials: Vec<Trial> = (0..800)
            .map(|_| {
                let v = (0..total).map(|_| mean + sigma_w * rand::Rng::sample::<f64, _>(&mut rng, StandardNormal)).collect();
                Trial::uniform(dt, v)
            })
            .collect();
        let windows = [0.05, 0.2, 0.5, 1.0, 6.0];
        let c = fit_noise_curve(&trials, &windows).unwrap();
        for (&(w, e), _) in c.anchors().iter().zip(&windows).take(4) {
            let n = (w / dt).round();
            let expected = sigma_w * (1.0 / n - 1.0 / total as f64).sqrt() / mean;
            assert!((e / expected - 1.0).abs() < 0.1, "window {w}: fitted {e} expected {expected}");
        }
        assert_eq!(c.anchors()[4].1, 0.0);
    }

    #[test]
    fn isotonic_pools_violators() {
        assert_eq!(isotonic_non_increasing(&[3.0, 1.0, 2.0, 0.5]), vec![3.0, 1.5, 1.5, 0.5]);
        assert_eq!(isotonic_non_increasing(&[1.0, 2.0, 3.0]), vec![2.0, 2.0, 2.0]);
    }

    proptest! {
        #[test]
        fn epsilon_round_trips_through_time(t in 0.5..5.5f64) {
            let c = NoiseCurve::default();
            prop_assert!((c.time_for_epsilon(c.epsilon_of(t)) - t).abs() < 1e-9);
        }

        #[test]
        fn epsilon_strictly_decreasing(a in 0.5..5.5f64, b in 0.5..5.5f64) {
            let c = NoiseCurve::default();
            prop_assume!((a - b).abs() > 1e-9);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(c.epsilon_of(lo) > c.epsilon_of(hi));
            prop_assert!(c.epsilon_of(hi) >= c.baseline());
        }

        #[test]
        fn noise_is_multiplicative(seed in 0u64..10_000, scale in 0.01..100.0f64, y in 0.1..10.0f64) {
            let a = apply_noise(y, 0.2, &mut substream(seed, Substream::Noise, 1));
            let b = apply_noise(scale * y, 0.2, &mut substream(seed, Substream::Noise, 1));
            prop_assert!((b / scale - a).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }
}
