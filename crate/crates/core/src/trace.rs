//! Per-run evaluation records.

use serde::{Deserialize, Serialize};

/// One measurement taken during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub run_id: usize,
    pub seed: u64,
    pub generation: usize,
    pub unit: Vec<f64>,
    pub native: Vec<f64>,
    /// Sample time in minutes.
    pub t: f64,
    /// Relative error standard deviation applied by the simulator.
    pub epsilon: f64,
    pub y_true: f64,
    pub y_noisy: f64,
    /// Cumulative simulated minutes after this measurement.
    pub elapsed: f64,
}

/// End-of-generation snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSummary {
    pub generation: usize,
    /// Cumulative simulated minutes when the generation finished.
    pub elapsed: f64,
    /// True cost of the updated distribution mean.
    pub mean_cost: f64,
    /// Spearman correlation between estimated and true candidate costs;
    /// `None` when undefined.
    pub sorting_rho: Option<f64>,
    pub mean_sample_time: f64,
    pub samples: usize,
}

/// Everything recorded for one optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub run_id: usize,
    pub seed: u64,
    /// True cost of the initial distribution mean.
    pub initial_mean_cost: f64,
    pub records: Vec<EvaluationRecord>,
    pub generations: Vec<GenerationSummary>,
}

impl RunTrace {
    pub fn end_time(&self) -> f64 {
        self.generations.last().map_or(0.0, |g| g.elapsed)
    }

    pub fn total_true_cost(&self) -> f64 {
        self.records.iter().map(|r| r.y_true).sum()
    }

    /// Sum of true costs over every record up to and including `generation`.
    pub fn true_cost_through(&self, generation: usize) -> f64 {
        self.records.iter().take_while(|r| r.generation <= generation).map(|r| r.y_true).sum()
    }

    /// Checks record ordering and time accounting.
    pub fn is_consistent(&self) -> bool {
        let mut elapsed = 0.0;
        let mut prev_gen = 0;
        for r in &self.records {
            elapsed += r.t;
            if r.generation < prev_gen || (r.elapsed - elapsed).abs() > 1e-9 * elapsed.max(1.0) {
                return false;
            }
            prev_gen = r.generation;
        }
        self.records.windows(2).all(|w| w[1].elapsed > w[0].elapsed)
            && self.generations.iter().enumerate().all(|(i, g)| g.generation == i)
    }
}
