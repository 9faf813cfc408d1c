//! `ascma` command-line driver.
//!
//! Every subcommand prints a JSON document on stdout. Failures print a JSON
//! error record `{"error": kind, "message": text}` on stderr and exit with
//! status 1.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ascma::harness::{
    perturbation_study, report, run_sweep, trajectory_deltas, write_plot_data, ExperimentConfig, PerturbConfig,
    ResultsStore, SweepConfig,
};
use ascma::{Error, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "ascma", version, about = "Noisy-optimization benchmark harness for adaptive sampling CMA-ES")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed base.
    #[arg(long)]
    seed_base: Option<u64>,
    /// Results directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    parallel: usize,
}

#[derive(Args)]
struct StoreArgs {
    /// Directory written by `run`, `sweep` or `perturb`.
    results: PathBuf,
    /// Where to write outputs; defaults to the results directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Runs one experiment config for its configured number of seeds.
    Run(RunArgs),
    /// Runs a grid of strategies sharing a base config.
    Sweep(RunArgs),
    /// Runs the cost-estimate and noise-curve perturbation study.
    Perturb(RunArgs),
    /// Reloads persisted traces and rewrites the summary report.
    Analyze(StoreArgs),
    /// Reloads persisted traces and writes figure-ready series.
    PlotData(StoreArgs),
}

fn apply_overrides(configs: &mut [ExperimentConfig], seed_base: Option<u64>) {
    for c in configs {
        if let Some(s) = seed_base {
            c.seed_base = s;
        }
        c.output = None;
    }
}

/// Persists and reports when an output directory is known, otherwise only
/// summarizes.
fn finish(store: &ResultsStore, out: Option<&Path>) -> Result<serde_json::Value> {
    let rep = match out {
        Some(dir) => {
            store.persist(dir)?;
            report(store, dir)?
        }
        None => ascma::harness::summarize(store)?,
    };
    Ok(serde_json::to_value(&rep).expect("report serializes"))
}

fn execute(command: Command) -> Result<serde_json::Value> {
    match command {
        Command::Run(a) => {
            let config = ExperimentConfig::from_path(&a.config)?;
            let out = a.out.or_else(|| config.output.clone());
            let mut configs = vec![config];
            apply_overrides(&mut configs, a.seed_base);
            finish(&run_sweep(&configs, a.parallel)?, out.as_deref())
        }
        Command::Sweep(a) => {
            let sweep = SweepConfig::from_path(&a.config)?;
            let out = a.out.or_else(|| sweep.base.output.clone());
            let mut configs = sweep.expand()?;
            apply_overrides(&mut configs, a.seed_base);
            finish(&run_sweep(&configs, a.parallel)?, out.as_deref())
        }
        Command::Perturb(a) => {
            let mut study = PerturbConfig::from_path(&a.config)?;
            let out = a.out.or_else(|| study.base.output.clone());
            apply_overrides(std::slice::from_mut(&mut study.base), a.seed_base);
            let store = perturbation_study(&study, a.parallel)?;
            let summary = finish(&store, out.as_deref())?;
            let deltas = trajectory_deltas(&store)?;
            Ok(json!({ "report": summary, "deltas": deltas }))
        }
        Command::Analyze(a) => {
            let store = ResultsStore::load(&a.results)?;
            let out = a.out.unwrap_or(a.results);
            Ok(serde_json::to_value(report(&store, &out)?).expect("report serializes"))
        }
        Command::PlotData(a) => {
            let store = ResultsStore::load(&a.results)?;
            let out = a.out.unwrap_or(a.results);
            write_plot_data(&store, &out)?;
            Ok(json!({ "plot_data": out }))
        }
    }
}

fn error_record(e: &Error) -> serde_json::Value {
    json!({ "error": e.kind(), "message": e.to_string() })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(value) => {
            println!("{}", serde_json::to_string_pretty(&value).expect("json value serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::FAILURE
        }
    }
}
