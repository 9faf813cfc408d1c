use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::io::{read_trace, write_text, write_trace};
use super::run::run_single;
use crate::error::{Error, Result};
use crate::metrics::{summarize_runs_with, StrategyAggregate};
use crate::trace::RunTrace;

pub const MANIFEST_FILE: &str = "manifest.json";

/// A run that failed inside a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub run_id: usize,
    pub seed: u64,
    pub kind: String,
    pub message: String,
}

/// All runs of one strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyResult {
    pub label: String,
    pub config: ExperimentConfig,
    pub traces: Vec<RunTrace>,
    pub failures: Vec<CellFailure>,
    /// `None` when every run failed.
    pub aggregate: Option<StrategyAggregate>,
}

impl StrategyResult {
    fn new(config: ExperimentConfig, traces: Vec<RunTrace>, failures: Vec<CellFailure>) -> Result<Self> {
        let aggregate = if traces.is_empty() {
            None
        } else {
            let y_star = config.landscape()?.y_star();
            Some(summarize_runs_with(&traces, y_star, config.convergence_reference)?)
        };
        Ok(Self { label: config.label(), config, traces, failures, aggregate })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the serialized config list.
    pub config_hash: String,
    pub seed_base: u64,
    pub version: String,
}

impl Provenance {
    pub fn for_configs(configs: &[ExperimentConfig]) -> Result<Self> {
        let text = serde_json::to_string(configs).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(Self {
            config_hash: hex::encode(Sha256::digest(text.as_bytes())),
            seed_base: configs.first().map_or(0, |c| c.seed_base),
            version: env!("CARGO_PKG_VERSION").to_string(),
        })
    }
}

/// Traces, aggregates and provenance for a set of strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsStore {
    pub strategies: Vec<StrategyResult>,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    label: String,
    directory: String,
    config: ExperimentConfig,
    /// `(run_id, initial_mean_cost)` of every persisted trace.
    runs: Vec<(usize, f64)>,
    failures: Vec<CellFailure>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    provenance: Provenance,
    strategies: Vec<ManifestEntry>,
}

fn directory_name(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.+".contains(c) { c } else { '_' }).collect()
}

impl ResultsStore {
    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&StrategyResult> {
        self.strategies.iter().find(|s| s.label == label)
    }

    pub fn trace_count(&self) -> usize {
        self.strategies.iter().map(|s| s.traces.len()).sum()
    }

    /// Writes every trace under `dir/<label>/` plus a manifest.
    pub fn persist(&self, dir: &Path) -> Result<()> {
        let mut entries = Vec::with_capacity(self.strategies.len());
        for s in &self.strategies {
            let directory = directory_name(&s.label);
            let sub = dir.join(&directory);
            let dim = s.config.landscape()?.dim();
            for t in &s.traces {
                write_trace(&sub, t, dim)?;
            }
            entries.push(ManifestEntry {
                label: s.label.clone(),
                directory,
                config: s.config.clone(),
                runs: s.traces.iter().map(|t| (t.run_id, t.initial_mean_cost)).collect(),
                failures: s.failures.clone(),
            });
        }
        let manifest = Manifest { provenance: self.provenance.clone(), strategies: entries };
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::format(&path, e))?;
        write_text(&path, &text)
    }

    /// Reloads a persisted store and recomputes its aggregates.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e))?;
        let mut strategies = Vec::with_capacity(manifest.strategies.len());
        for entry in manifest.strategies {
            let dim = entry.config.landscape()?.dim();
            let sub: PathBuf = dir.join(&entry.directory);
            let traces = entry
                .runs
                .iter()
                .map(|&(run_id, initial)| read_trace(&sub, run_id, dim, initial))
                .collect::<Result<Vec<_>>>()?;
            let mut result = StrategyResult::new(entry.config, traces, entry.failures)?;
            result.label = entry.label;
            strategies.push(result);
        }
        Ok(Self { strategies, provenance: manifest.provenance })
    }
}

/// Runs `config.runs` seeds of every config. Failed runs are recorded and
/// skipped. `parallel` caps worker threads; 0 lets the pool decide.
pub fn run_sweep(configs: &[ExperimentConfig], parallel: usize) -> Result<ResultsStore> {
    if configs.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one config".into()));
    }
    for c in configs {
        c.validate()?;
    }
    let cells: Vec<(usize, u64)> = configs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| (0..c.runs as u64).map(move |r| (i, c.seed_base + r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<RunTrace>> =
        pool.install(|| cells.par_iter().map(|&(i, seed)| run_single(&configs[i], seed)).collect());

    let mut grouped: Vec<(Vec<RunTrace>, Vec<CellFailure>)> = vec![(Vec::new(), Vec::new()); configs.len()];
    for (&(i, seed), outcome) in cells.iter().zip(outcomes) {
        match outcome {
            Ok(trace) => grouped[i].0.push(trace),
            Err(e) => grouped[i].1.push(CellFailure {
                run_id: super::run::run_index(&configs[i], seed),
                seed,
                kind: e.kind().to_string(),
                message: e.to_string(),
            }),
        }
    }
    let strategies = configs
        .iter()
        .zip(grouped)
        .map(|(c, (traces, failures))| StrategyResult::new(c.clone(), traces, failures))
        .collect::<Result<Vec<_>>>()?;
    let store = ResultsStore { strategies, provenance: Provenance::for_configs(configs)? };
    if let Some(dir) = &configs[0].output {
        store.persist(dir)?;
    }
    Ok(store)
}
