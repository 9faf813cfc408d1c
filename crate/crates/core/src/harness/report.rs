use std::path::Path;

use serde::{Deserialize, Serialize};

use super::io::write_text;
use super::sweep::{ResultsStore, StrategyResult};
use crate::error::{Error, Result};
use crate::metrics::{score, select_best_static, t_test_two_tailed, StrategyScore, MIN_FINE_RELIABILITY};
use crate::trace::RunTrace;

/// Points in the time grid used for trajectory series.
pub const TRAJECTORY_POINTS: usize = 200;

/// p-values of two-tailed t-tests against the reference strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub coarse_time_p: Option<f64>,
    pub fine_time_p: Option<f64>,
    pub coarse_cost_p: Option<f64>,
    pub fine_cost_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub runs: usize,
    pub failures: usize,
    pub coarse_time_mean: f64,
    pub coarse_time_sd: f64,
    pub fine_time_mean: f64,
    pub fine_time_sd: f64,
    pub coarse_cost_mean: f64,
    pub coarse_cost_sd: f64,
    pub fine_cost_mean: f64,
    pub fine_cost_sd: f64,
    pub coarse_reliability: f64,
    pub fine_reliability: f64,
    pub mean_sorting_rho: f64,
    pub score: Option<StrategyScore>,
    /// Absent for the reference itself or when there is no reference.
    pub comparison: Option<Comparison>,
    /// Below the fine-reliability cutoff for best-static selection.
    pub excluded: bool,
    pub best_static: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Label of the AS-CMA strategy scores and tests are relative to.
    pub reference: Option<String>,
    pub best_static: Option<String>,
    /// True when no static strategy met the reliability cutoff.
    pub filter_dropped: bool,
    pub rows: Vec<SummaryRow>,
    pub config_hash: String,
    pub version: String,
}

/// Time grid from 0 to the longest run end, inclusive.
pub fn time_grid(traces: &[&RunTrace], points: usize) -> Vec<f64> {
    let end = traces.iter().map(|t| t.end_time()).fold(0.0, f64::max);
    (0..points).map(|i| end * i as f64 / (points - 1).max(1) as f64).collect()
}

/// Mean true cost of the distribution mean at each grid time, averaged over
/// runs. A run contributes its latest completed generation, or its initial
/// cost before the first one finishes.
pub fn mean_trajectory(traces: &[RunTrace], grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&time| {
            let sum: f64 = traces
                .iter()
                .map(|t| {
                    let done = t.generations.partition_point(|g| g.elapsed <= time);
                    if done == 0 {
                        t.initial_mean_cost
                    } else {
                        t.generations[done - 1].mean_cost
                    }
                })
                .sum();
            sum / traces.len() as f64
        })
        .collect()
}

/// Per-generation average over runs of a generation field; runs that
/// stopped earlier drop out.
fn per_generation(traces: &[RunTrace], field: impl Fn(&crate::trace::GenerationSummary) -> Option<f64>) -> Vec<f64> {
    let longest = traces.iter().map(|t| t.generations.len()).max().unwrap_or(0);
    (0..longest)
        .map(|g| {
            let vals: Vec<f64> = traces.iter().filter_map(|t| t.generations.get(g).and_then(&field)).collect();
            if vals.is_empty() {
                f64::NAN
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            }
        })
        .collect()
}

fn reference_of(store: &ResultsStore) -> Option<&StrategyResult> {
    store.strategies.iter().find(|s| s.config.strategy.is_ascma() && s.aggregate.is_some())
}

fn p_value(a: &[f64], b: &[f64]) -> Option<f64> {
    t_test_two_tailed(a, b).ok().map(|t| t.p)
}

/// Builds the summary table without touching the filesystem.
pub fn summarize(store: &ResultsStore) -> Result<Report> {
    if store.is_empty() {
        return Err(Error::InsufficientData("results store has no strategies".into()));
    }
    let reference = reference_of(store);
    let ref_agg = reference.and_then(|r| r.aggregate.as_ref());

    let statics: Vec<(String, crate::metrics::StrategyAggregate)> = store
        .strategies
        .iter()
        .filter(|s| s.config.strategy.is_static())
        .filter_map(|s| s.aggregate.clone().map(|a| (s.label.clone(), a)))
        .collect();
    let selection = match ref_agg {
        Some(r) if !statics.is_empty() => Some(select_best_static(&statics, r)?),
        _ => None,
    };

    let mut rows = Vec::with_capacity(store.strategies.len());
    for s in &store.strategies {
        let Some(a) = &s.aggregate else {
            rows.push(SummaryRow {
                label: s.label.clone(),
                runs: 0,
                failures: s.failures.len(),
                coarse_time_mean: f64::NAN,
                coarse_time_sd: f64::NAN,
                fine_time_mean: f64::NAN,
                fine_time_sd: f64::NAN,
                coarse_cost_mean: f64::NAN,
                coarse_cost_sd: f64::NAN,
                fine_cost_mean: f64::NAN,
                fine_cost_sd: f64::NAN,
                coarse_reliability: 0.0,
                fine_reliability: 0.0,
                mean_sorting_rho: f64::NAN,
                score: None,
                comparison: None,
                excluded: true,
                best_static: false,
            });
            continue;
        };
        let is_reference = reference.is_some_and(|r| r.label == s.label);
        let comparison = match ref_agg {
            Some(r) if !is_reference => Some(Comparison {
                coarse_time_p: p_value(&a.coarse.times, &r.coarse.times),
                fine_time_p: p_value(&a.fine.times, &r.fine.times),
                coarse_cost_p: p_value(&a.coarse.costs, &r.coarse.costs),
                fine_cost_p: p_value(&a.fine.costs, &r.fine.costs),
            }),
            _ => None,
        };
        let excluded = s.config.strategy.is_static()
            && a.fine.reliability < MIN_FINE_RELIABILITY
            && !selection.as_ref().is_some_and(|sel| sel.filter_dropped);
        rows.push(SummaryRow {
            label: s.label.clone(),
            runs: a.runs,
            failures: s.failures.len(),
            coarse_time_mean: a.coarse.time_mean,
            coarse_time_sd: a.coarse.time_sd,
            fine_time_mean: a.fine.time_mean,
            fine_time_sd: a.fine.time_sd,
            coarse_cost_mean: a.coarse.cost_mean,
            coarse_cost_sd: a.coarse.cost_sd,
            fine_cost_mean: a.fine.cost_mean,
            fine_cost_sd: a.fine.cost_sd,
            coarse_reliability: a.coarse.reliability,
            fine_reliability: a.fine.reliability,
            mean_sorting_rho: a.mean_sorting_rho,
            score: ref_agg.map(|r| score(a, r)),
            comparison,
            excluded,
            best_static: selection.as_ref().is_some_and(|sel| sel.label == s.label),
        });
    }
    Ok(Report {
        reference: reference.map(|r| r.label.clone()),
        best_static: selection.as_ref().map(|s| s.label.clone()),
        filter_dropped: selection.as_ref().is_some_and(|s| s.filter_dropped),
        rows,
        config_hash: store.provenance.config_hash.clone(),
        version: store.provenance.version.clone(),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn summary_csv(report: &Report) -> String {
    let mut out = String::from(
        "label,runs,failures,coarse_time_mean,coarse_time_sd,fine_time_mean,fine_time_sd,\
         coarse_cost_mean,coarse_cost_sd,fine_cost_mean,fine_cost_sd,coarse_reliability,fine_reliability,\
         mean_sorting_rho,score,p_coarse_time,p_fine_time,p_coarse_cost,p_fine_cost,excluded,best_static\n",
    );
    for r in &report.rows {
        let c = r.comparison;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.label,
            r.runs,
            r.failures,
            r.coarse_time_mean,
            r.coarse_time_sd,
            r.fine_time_mean,
            r.fine_time_sd,
            r.coarse_cost_mean,
            r.coarse_cost_sd,
            r.fine_cost_mean,
            r.fine_cost_sd,
            r.coarse_reliability,
            r.fine_reliability,
            r.mean_sorting_rho,
            opt(r.score.map(|s| s.total)),
            opt(c.and_then(|c| c.coarse_time_p)),
            opt(c.and_then(|c| c.fine_time_p)),
            opt(c.and_then(|c| c.coarse_cost_p)),
            opt(c.and_then(|c| c.fine_cost_p)),
            r.excluded,
            r.best_static
        ));
    }
    out
}

fn series_csv(first: &str, index: &[f64], labels: &[&str], columns: &[Vec<f64>]) -> String {
    let mut out = format!("{first},{}\n", labels.join(","));
    for (i, x) in index.iter().enumerate() {
        let row: Vec<String> = columns.iter().map(|c| c.get(i).map(|v| v.to_string()).unwrap_or_default()).collect();
        out.push_str(&format!("{x},{}\n", row.join(",")));
    }
    out
}

/// Figure-ready series: mean trajectory on a shared time grid, and sorting
/// accuracy and sample time per generation.
pub fn write_plot_data(store: &ResultsStore, dir: &Path) -> Result<()> {
    let live: Vec<&StrategyResult> = store.strategies.iter().filter(|s| !s.traces.is_empty()).collect();
    if live.is_empty() {
        return Err(Error::InsufficientData("results store has no traces".into()));
    }
    let labels: Vec<&str> = live.iter().map(|s| s.label.as_str()).collect();
    let all: Vec<&RunTrace> = live.iter().flat_map(|s| s.traces.iter()).collect();
    let grid = time_grid(&all, TRAJECTORY_POINTS);
    let traj: Vec<Vec<f64>> = live.iter().map(|s| mean_trajectory(&s.traces, &grid)).collect();
    write_text(&dir.join("mean_trajectory.csv"), &series_csv("elapsed_min", &grid, &labels, &traj))?;

    let rho: Vec<Vec<f64>> = live.iter().map(|s| per_generation(&s.traces, |g| g.sorting_rho)).collect();
    let times: Vec<Vec<f64>> = live.iter().map(|s| per_generation(&s.traces, |g| Some(g.mean_sample_time))).collect();
    let longest = rho.iter().map(Vec::len).max().unwrap_or(0);
    let gens: Vec<f64> = (0..longest).map(|g| g as f64).collect();
    write_text(&dir.join("sorting_accuracy.csv"), &series_csv("generation", &gens, &labels, &rho))?;
    write_text(&dir.join("sample_time.csv"), &series_csv("generation", &gens, &labels, &times))
}

/// Writes `summary.csv`, `report.json` and the plot-data series.
pub fn report(store: &ResultsStore, dir: &Path) -> Result<Report> {
    let rep = summarize(store)?;
    write_text(&dir.join("summary.csv"), &summary_csv(&rep))?;
    let path = dir.join("report.json");
    let json = serde_json::to_string_pretty(&rep).map_err(|e| Error::format(&path, e))?;
    write_text(&path, &json)?;
    write_plot_data(store, dir)?;
    Ok(rep)
}
