//! Delimited trace files.
//!
//! Each run writes `run_<id>.csv` (one row per evaluation) and
//! `run_<id>_generations.csv` (one row per generation). Floats use Rust's
//! shortest round-trip formatting so a reload reproduces the trace exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::trace::{EvaluationRecord, GenerationSummary, RunTrace};

pub fn records_path(dir: &Path, run_id: usize) -> PathBuf {
    dir.join(format!("run_{run_id:04}.csv"))
}

pub fn generations_path(dir: &Path, run_id: usize) -> PathBuf {
    dir.join(format!("run_{run_id:04}_generations.csv"))
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Evaluation records as delimited text.
pub fn records_csv(trace: &RunTrace, dim: usize) -> String {
    let mut header = vec!["run_id".to_string(), "seed".into(), "generation".into()];
    header.extend((0..dim).map(|i| format!("u{i}")));
    header.extend((0..dim).map(|i| format!("x{i}")));
    header.extend(["t_i", "epsilon", "y_true", "y_noisy", "elapsed_min"].map(String::from));
    let mut out = header.join(",");
    out.push('\n');
    for r in &trace.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.run_id,
            r.seed,
            r.generation,
            join(&r.unit),
            join(&r.native),
            r.t,
            r.epsilon,
            r.y_true,
            r.y_noisy,
            r.elapsed
        ));
    }
    out
}

pub fn generations_csv(trace: &RunTrace) -> String {
    let mut out = String::from("generation,elapsed_min,mean_cost,sorting_rho,mean_t,samples\n");
    for g in &trace.generations {
        let rho = g.sorting_rho.map(|r| r.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            g.generation, g.elapsed, g.mean_cost, rho, g.mean_sample_time, g.samples
        ));
    }
    out
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_trace(dir: &Path, trace: &RunTrace, dim: usize) -> Result<()> {
    write_text(&records_path(dir, trace.run_id), &records_csv(trace, dim))?;
    write_text(&generations_path(dir, trace.run_id), &generations_csv(trace))
}

fn parse<T: std::str::FromStr>(path: &Path, field: &str, row: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    field.parse().map_err(|e: T::Err| Error::format(path, format!("row {row}: `{field}`: {e}")))
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::Reader::from_path(path).map_err(|e| Error::format(path, e))
}

/// Loads a trace written by [`write_trace`].
pub fn read_trace(dir: &Path, run_id: usize, dim: usize, initial_mean_cost: f64) -> Result<RunTrace> {
    let rpath = records_path(dir, run_id);
    let mut records = Vec::new();
    let mut seed = 0;
    for (row, rec) in reader(&rpath)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(&rpath, e))?;
        if rec.len() != 3 + 2 * dim + 5 {
            return Err(Error::format(&rpath, format!("row {row}: expected {} fields", 3 + 2 * dim + 5)));
        }
        let f = |i: usize| parse::<f64>(&rpath, &rec[i], row);
        let unit = (0..dim).map(|i| f(3 + i)).collect::<Result<Vec<_>>>()?;
        let native = (0..dim).map(|i| f(3 + dim + i)).collect::<Result<Vec<_>>>()?;
        let base = 3 + 2 * dim;
        seed = parse(&rpath, &rec[1], row)?;
        records.push(EvaluationRecord {
            run_id: parse(&rpath, &rec[0], row)?,
            seed,
            generation: parse(&rpath, &rec[2], row)?,
            unit,
            native,
            t: f(base)?,
            epsilon: f(base + 1)?,
            y_true: f(base + 2)?,
            y_noisy: f(base + 3)?,
            elapsed: f(base + 4)?,
        });
    }
    let gpath = generations_path(dir, run_id);
    let mut generations = Vec::new();
    for (row, rec) in reader(&gpath)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(&gpath, e))?;
        if rec.len() != 6 {
            return Err(Error::format(&gpath, format!("row {row}: expected 6 fields")));
        }
        generations.push(GenerationSummary {
            generation: parse(&gpath, &rec[0], row)?,
            elapsed: parse(&gpath, &rec[1], row)?,
            mean_cost: parse(&gpath, &rec[2], row)?,
            sorting_rho: if rec[3].is_empty() { None } else { Some(parse(&gpath, &rec[3], row)?) },
            mean_sample_time: parse(&gpath, &rec[4], row)?,
            samples: parse(&gpath, &rec[5], row)?,
        });
    }
    Ok(RunTrace { run_id, seed, initial_mean_cost, records, generations })
}
