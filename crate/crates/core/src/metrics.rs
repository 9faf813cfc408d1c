//! Outcome metrics: sorting accuracy, convergence, strategy scoring and
//! significance testing.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
pub use crate::trace::{EvaluationRecord, GenerationSummary, RunTrace};

pub const COARSE_THRESHOLD: f64 = 0.20;
pub const FINE_THRESHOLD: f64 = 0.05;
/// Minimum fine-convergence reliability (percent) for best-static selection.
pub const MIN_FINE_RELIABILITY: f64 = 90.0;

/// Average ranks (1-based), ties share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &idx[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation with average ranks for ties.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), actual: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData("correlation needs at least two values".into()));
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

/// What the convergence threshold is a fraction of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceReference {
    /// Limit is `(1 + threshold) * y_star`.
    #[default]
    TrueMinimum,
    /// Limit is `y_star + threshold * initial_cost`.
    InitialCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub converged: bool,
    /// Generation at which the run entered the threshold for good.
    pub generation: Option<usize>,
    /// Minutes to convergence, or the end of the run.
    pub time: f64,
    /// Cumulative true cost to convergence, or of the whole run.
    pub cost: f64,
}

fn limit_for(trace: &RunTrace, y_star: f64, threshold: f64, reference: ConvergenceReference) -> f64 {
    match reference {
        ConvergenceReference::TrueMinimum => (1.0 + threshold) * y_star,
        ConvergenceReference::InitialCost => y_star + threshold * trace.initial_mean_cost,
    }
}

/// Earliest generation from which the mean's true cost stays within the
/// threshold for the rest of the run.
pub fn detect_convergence(trace: &RunTrace, y_star: f64, threshold: f64, budget_end: f64) -> Convergence {
    detect_convergence_with(trace, y_star, threshold, budget_end, ConvergenceReference::TrueMinimum)
}

pub fn detect_convergence_with(
    trace: &RunTrace,
    y_star: f64,
    threshold: f64,
    budget_end: f64,
    reference: ConvergenceReference,
) -> Convergence {
    let limit = limit_for(trace, y_star, threshold, reference);
    let mut entered = None;
    for g in trace.generations.iter().rev() {
        if g.mean_cost <= limit {
            entered = Some(g);
        } else {
            break;
        }
    }
    match entered {
        Some(g) => Convergence {
            converged: true,
            generation: Some(g.generation),
            time: g.elapsed,
            cost: trace.true_cost_through(g.generation),
        },
        None => Convergence { converged: false, generation: None, time: budget_end, cost: trace.total_true_cost() },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConvergence {
    pub coarse: Convergence,
    pub fine: Convergence,
}

pub fn run_convergence(trace: &RunTrace, y_star: f64, reference: ConvergenceReference) -> RunConvergence {
    let end = trace.end_time();
    RunConvergence {
        coarse: detect_convergence_with(trace, y_star, COARSE_THRESHOLD, end, reference),
        fine: detect_convergence_with(trace, y_star, FINE_THRESHOLD, end, reference),
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Aggregate of one convergence threshold over many runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAggregate {
    pub threshold: f64,
    pub time_mean: f64,
    pub time_sd: f64,
    pub cost_mean: f64,
    pub cost_sd: f64,
    /// Percent of runs that converged.
    pub reliability: f64,
    pub times: Vec<f64>,
    pub costs: Vec<f64>,
}

impl ThresholdAggregate {
    fn from_runs(threshold: f64, conv: &[Convergence]) -> Self {
        let times: Vec<f64> = conv.iter().map(|c| c.time).collect();
        let costs: Vec<f64> = conv.iter().map(|c| c.cost).collect();
        let (time_mean, time_sd) = mean_sd(&times);
        let (cost_mean, cost_sd) = mean_sd(&costs);
        let converged = conv.iter().filter(|c| c.converged).count();
        let reliability = 100.0 * converged as f64 / conv.len().max(1) as f64;
        Self { threshold, time_mean, time_sd, cost_mean, cost_sd, reliability, times, costs }
    }
}

/// Per-strategy summary over a set of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyAggregate {
    pub runs: usize,
    pub coarse: ThresholdAggregate,
    pub fine: ThresholdAggregate,
    /// Spearman rho averaged over time within each run, then over runs.
    pub mean_sorting_rho: f64,
}

/// Sorting accuracy of one run averaged over simulated time: each
/// generation's rho is weighted by the minutes it took. Generations with an
/// undefined rho are skipped.
pub fn time_averaged_rho(trace: &RunTrace) -> Option<f64> {
    let mut start = 0.0;
    let (mut num, mut den) = (0.0, 0.0);
    for g in &trace.generations {
        let duration = g.elapsed - start;
        start = g.elapsed;
        if let Some(r) = g.sorting_rho {
            num += r * duration;
            den += duration;
        }
    }
    (den > 0.0).then(|| num / den)
}

pub fn summarize_runs(runs: &[RunTrace], y_star: f64) -> Result<StrategyAggregate> {
    summarize_runs_with(runs, y_star, ConvergenceReference::TrueMinimum)
}

pub fn summarize_runs_with(
    runs: &[RunTrace],
    y_star: f64,
    reference: ConvergenceReference,
) -> Result<StrategyAggregate> {
    if runs.is_empty() {
        return Err(Error::InsufficientData("no runs to summarize".into()));
    }
    let conv: Vec<RunConvergence> = runs.iter().map(|t| run_convergence(t, y_star, reference)).collect();
    let coarse: Vec<Convergence> = conv.iter().map(|c| c.coarse).collect();
    let fine: Vec<Convergence> = conv.iter().map(|c| c.fine).collect();
    let rhos: Vec<f64> = runs.iter().filter_map(time_averaged_rho).collect();
    let mean_sorting_rho = if rhos.is_empty() { f64::NAN } else { rhos.iter().sum::<f64>() / rhos.len() as f64 };
    Ok(StrategyAggregate {
        runs: runs.len(),
        coarse: ThresholdAggregate::from_runs(COARSE_THRESHOLD, &coarse),
        fine: ThresholdAggregate::from_runs(FINE_THRESHOLD, &fine),
        mean_sorting_rho,
    })
}

/// Six metrics normalized to a reference strategy; lower is better and the
/// reference itself scores 1 on each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyScore {
    pub coarse_time: f64,
    pub fine_time: f64,
    pub coarse_cost: f64,
    pub fine_cost: f64,
    pub coarse_reliability: f64,
    pub fine_reliability: f64,
    pub total: f64,
}

pub fn score(candidate: &StrategyAggregate, reference: &StrategyAggregate) -> StrategyScore {
    let ratio = |a: f64, b: f64| if a == b { 1.0 } else { a / b };
    let coarse_time = ratio(candidate.coarse.time_mean, reference.coarse.time_mean);
    let fine_time = ratio(candidate.fine.time_mean, reference.fine.time_mean);
    let coarse_cost = ratio(candidate.coarse.cost_mean, reference.coarse.cost_mean);
    let fine_cost = ratio(candidate.fine.cost_mean, reference.fine.cost_mean);
    let coarse_reliability = ratio(reference.coarse.reliability, candidate.coarse.reliability);
    let fine_reliability = ratio(reference.fine.reliability, candidate.fine.reliability);
    let total = coarse_time + fine_time + coarse_cost + fine_cost + coarse_reliability + fine_reliability;
    StrategyScore { coarse_time, fine_time, coarse_cost, fine_cost, coarse_reliability, fine_reliability, total }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub label: String,
    pub score: StrategyScore,
    /// True when no strategy met the reliability filter and all were scored.
    pub filter_dropped: bool,
}

/// Picks the strategy with the lowest six-metric score among those reaching
/// fine convergence in at least 90% of runs. If none qualifies, all are
/// scored.
pub fn select_best_static(
    candidates: &[(String, StrategyAggregate)],
    reference: &StrategyAggregate,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::NoEligibleStrategy);
    }
    let eligible: Vec<&(String, StrategyAggregate)> =
        candidates.iter().filter(|(_, a)| a.fine.reliability >= MIN_FINE_RELIABILITY).collect();
    let filter_dropped = eligible.is_empty();
    let pool: Vec<&(String, StrategyAggregate)> =
        if filter_dropped { candidates.iter().collect() } else { eligible };
    pool.into_iter()
        .map(|(label, agg)| Selection { label: label.clone(), score: score(agg, reference), filter_dropped })
        .min_by(|a, b| a.score.total.total_cmp(&b.score.total))
        .ok_or(Error::NoEligibleStrategy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Two-tailed Student t-test with pooled variance.
pub fn t_test_two_tailed(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData("each sample needs at least two values".into()));
    }
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * sa * sa + (nb - 1.0) * sb * sb) / df;
    if !(pooled > 0.0) {
        return Err(Error::DegenerateTest);
    }
    let t = (ma - mb) / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::NumericalState(e.to_string()))?;
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(TTest { t, df, p })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSize {
    /// Unrounded per-group size from the normal approximation.
    pub per_group_exact: f64,
    pub per_group: usize,
    /// Total participants, `ceil(2 * per_group_exact)`.
    pub total: usize,
}

/// Two-sample normal-approximation sample size for detecting the difference
/// between two means.
pub fn required_sample_size(mean1: f64, sd1: f64, mean2: f64, sd2: f64, alpha: f64, power: f64) -> Result<SampleSize> {
    if !(sd1 > 0.0 && sd2 > 0.0) {
        return Err(Error::InvalidConfig("standard deviations must be positive".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0 && power > 0.0 && power < 1.0) {
        return Err(Error::InvalidConfig("alpha and power must lie in (0, 1)".into()));
    }
    let delta = mean1 - mean2;
    if delta == 0.0 {
        return Err(Error::InfiniteSampleSize);
    }
    let std_normal = Normal::standard();
    let z = std_normal.inverse_cdf(1.0 - alpha / 2.0) + std_normal.inverse_cdf(power);
    let per_group_exact = z * z * (sd1 * sd1 + sd2 * sd2) / (delta * delta);
    Ok(SampleSize {
        per_group_exact,
        per_group: per_group_exact.ceil() as usize,
        total: (2.0 * per_group_exact).ceil() as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn trajectory(costs: &[f64], times: &[f64]) -> RunTrace {
        let generations = costs
            .iter()
            .zip(times)
            .enumerate()
            .map(|(g, (&c, &t))| GenerationSummary {
                generation: g,
                elapsed: t,
                mean_cost: c,
                sorting_rho: None,
                mean_sample_time: 1.0,
                samples: 1,
            })
            .collect();
        let mut elapsed = 0.0;
        let records = times
            .iter()
            .enumerate()
            .map(|(g, &t)| {
                let dt = t - elapsed;
                elapsed = t;
                EvaluationRecord {
                    run_id: 0,
                    seed: 0,
                    generation: g,
                    unit: vec![],
                    native: vec![],
                    t: dt,
                    epsilon: 0.0,
                    y_true: costs[g] * 2.0,
                    y_noisy: costs[g],
                    elapsed: t,
                }
            })
            .collect();
        RunTrace { run_id: 0, seed: 0, initial_mean_cost: 40.0, records, generations }
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman_rho(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman_rho(&[1.0, 2.0, 3.0, 4.0], &[40.0, 30.0, 20.0, 10.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!((spearman_rho(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 3.0, 4.0]).unwrap() - 0.8).abs() < 1e-15);
        assert!(matches!(spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::UndefinedCorrelation)));
    }

    #[test]
    fn ties_use_average_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn stay_within_rule() {
        let t = trajectory(&[20.0, 11.0, 10.4, 10.6, 10.3, 10.2], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let c = detect_convergence(&t, 10.0, FINE_THRESHOLD, 6.0);
        assert!(c.converged);
        assert_eq!(c.time, 5.0);
        assert_eq!(c.generation, Some(4));
        assert_eq!(c.cost, 2.0 * (20.0 + 11.0 + 10.4 + 10.6 + 10.3));

        let always = trajectory(&[10.1, 10.2], &[3.0, 4.0]);
        assert_eq!(detect_convergence(&always, 10.0, FINE_THRESHOLD, 9.0).time, 3.0);

        let ends_high = trajectory(&[10.1, 10.9], &[3.0, 4.0]);
        let c = detect_convergence(&ends_high, 10.0, FINE_THRESHOLD, 9.0);
        assert!(!c.converged);
        assert_eq!(c.time, 9.0);
        assert_eq!(c.cost, ends_high.total_true_cost());
    }

    #[test]
    fn initial_cost_reference() {
        // Initial cost 40: fine limit becomes 10 + 0.05 * 40 = 12.
        let t = trajectory(&[20.0, 11.5, 11.8], &[1.0, 2.0, 3.0]);
        let c = detect_convergence_with(&t, 10.0, FINE_THRESHOLD, 3.0, ConvergenceReference::InitialCost);
        assert_eq!(c.time, 2.0);
        assert!(!detect_convergence(&t, 10.0, FINE_THRESHOLD, 3.0).converged);
    }

    #[test]
    fn t_test_reference_values() {
        let r = t_test_two_tailed(&[1.0, 2.0, 3.0, 4.0, 5.0], &[3.0, 4.0, 5.0, 6.0, 7.0]).unwrap();
        assert!((r.t + 2.0).abs() < 1e-12);
        assert_eq!(r.df, 8.0);
        assert!((r.p - 0.0805).abs() < 5e-4, "p = {}", r.p);
        let same = t_test_two_tailed(&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(same.t, 0.0);
        assert!((same.p - 1.0).abs() < 1e-12);
        assert!(matches!(t_test_two_tailed(&[1.0, 1.0], &[1.0, 1.0]), Err(Error::DegenerateTest)));
    }

    #[test]
    fn sample_size_examples() {
        let example = required_sample_size(233.0, 226.0, 115.0, 107.0, 0.05, 0.8).unwrap();
        assert_eq!(example.total, 71);
        let textbook = required_sample_size(1.0, 1.0, 0.0, 1.0, 0.05, 0.8).unwrap();
        assert_eq!(textbook.per_group, 16);
        let double = required_sample_size(2.0, 1.0, 0.0, 1.0, 0.05, 0.8).unwrap();
        assert!((textbook.per_group_exact / double.per_group_exact - 4.0).abs() < 1e-12);
        assert!(matches!(required_sample_size(1.0, 1.0, 1.0, 1.0, 0.05, 0.8), Err(Error::InfiniteSampleSize)));
    }

    fn agg(reliab: (f64, f64), times: (f64, f64), costs: (f64, f64)) -> StrategyAggregate {
        let th = |threshold, reliability, t: f64, c: f64| ThresholdAggregate {
            threshold,
            time_mean: t,
            time_sd: 0.0,
            cost_mean: c,
            cost_sd: 0.0,
            reliability,
            times: vec![t],
            costs: vec![c],
        };
        StrategyAggregate {
            runs: 1,
            coarse: th(COARSE_THRESHOLD, reliab.0, times.0, costs.0),
            fine: th(FINE_THRESHOLD, reliab.1, times.1, costs.1),
            mean_sorting_rho: 0.0,
        }
    }

    #[test]
    fn selection_scores() {
        let reference = agg((100.0, 95.0), (50.0, 100.0), (40.0, 80.0));
        assert_eq!(score(&reference, &reference).total, 6.0);

        let a = agg((100.0, 92.0), (60.0, 150.0), (50.0, 120.0));
        let b = agg((100.0, 100.0), (80.0, 130.0), (60.0, 100.0));
        let c = agg((100.0, 50.0), (30.0, 60.0), (20.0, 40.0));
        // a: 1.2 + 1.5 + 1.25 + 1.5 + 1 + 95/92; b: 1.6 + 1.3 + 1.5 + 1.25 + 1 + 0.95.
        let sa: f64 = 1.2 + 1.5 + 1.25 + 1.5 + 1.0 + 95.0 / 92.0;
        let sb = 1.6 + 1.3 + 1.5 + 1.25 + 1.0 + 0.95;
        let list = vec![("a".to_string(), a.clone()), ("b".to_string(), b), ("c".to_string(), c.clone())];
        let sel = select_best_static(&list, &reference).unwrap();
        assert_eq!(sel.label, if sa < sb { "a" } else { "b" });
        assert!((sel.score.total - sa.min(sb)).abs() < 1e-12);
        assert!(!sel.filter_dropped);

        let only_c = vec![("c".to_string(), c)];
        let sel = select_best_static(&only_c, &reference).unwrap();
        assert!(sel.filter_dropped);
        assert_eq!(sel.label, "c");
        let only_a = vec![("a".to_string(), a)];
        assert_eq!(select_best_static(&only_a, &reference).unwrap().label, "a");
        assert!(matches!(select_best_static(&[], &reference), Err(Error::NoEligibleStrategy)));
    }

    #[test]
    fn summary_handles_partial_convergence() {
        let good = trajectory(&[20.0, 10.1], &[1.0, 2.0]);
        let bad = trajectory(&[20.0, 13.0], &[1.0, 2.0]);
        let s = summarize_runs(&[good.clone(), bad], 10.0).unwrap();
        assert_eq!(s.fine.reliability, 50.0);
        let s = summarize_runs(&[good.clone(), good], 10.0).unwrap();
        assert_eq!(s.fine.reliability, 100.0);
        assert_eq!(s.fine.time_sd, 0.0);
    }

    proptest! {
        #[test]
        fn spearman_bounded_and_monotone_invariant(
            a in proptest::collection::vec(-10.0..10.0f64, 3..20),
            seed in 0u64..1000,
        ) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v.sin() + ((i as u64 * 31 + seed) % 7) as f64).collect();
            if let Ok(r) = spearman_rho(&a, &b) {
                prop_assert!((-1.0..=1.0).contains(&r));
                let ta: Vec<f64> = a.iter().map(|v| v.exp()).collect();
                let tb: Vec<f64> = b.iter().map(|v| 3.0 * v - 7.0).collect();
                prop_assert!((spearman_rho(&ta, &tb).unwrap() - r).abs() < 1e-12);
            }
        }

        #[test]
        fn fine_never_before_coarse(costs in proptest::collection::vec(10.0..15.0f64, 1..30)) {
            let times: Vec<f64> = (1..=costs.len()).map(|i| i as f64).collect();
            let t = trajectory(&costs, &times);
            let c = detect_convergence(&t, 10.0, COARSE_THRESHOLD, 100.0);
            let f = detect_convergence(&t, 10.0, FINE_THRESHOLD, 100.0);
            if f.converged {
                prop_assert!(c.converged);
                prop_assert!(c.time <= f.time);
            }
            // A worse-than-limit tail revokes convergence.
            let mut tail = costs.clone();
            tail.push(20.0);
            let times: Vec<f64> = (1..=tail.len()).map(|i| i as f64).collect();
            prop_assert!(!detect_convergence(&trajectory(&tail, &times), 10.0, COARSE_THRESHOLD, 100.0).converged);
        }
    }
}
