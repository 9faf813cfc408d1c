use nalgebra::DVector;
use rand::Rng;

use super::config::{ExperimentConfig, InitMode, StrategySpec};
use crate::adaptive::{self, AsCmaState};
use crate::cma::{self, CandidateSet, CmaParams, CmaState};
use crate::error::{Error, Result};
use crate::klkg::{self, KlkgConfig};
use crate::landscapes::Landscape;
use crate::metrics::spearman_rho;
use crate::noise::measure;
use crate::rng::{substream, NoiseStreams, Substream};
use crate::trace::{EvaluationRecord, GenerationSummary, RunTrace};

/// Starting mean for a run; depends only on the seed and the init mode.
pub fn initial_point(mode: &InitMode, dim: usize, seed: u64) -> DVector<f64> {
    match mode {
        InitMode::FixedPoint { point } => DVector::from_column_slice(point),
        InitMode::UniformRandom => {
            let mut rng = substream(seed, Substream::Init, 0);
            DVector::from_iterator(dim, (0..dim).map(|_| rng.random::<f64>()))
        }
    }
}

/// Run index for `seed` under the config's seed base.
pub fn run_index(config: &ExperimentConfig, seed: u64) -> usize {
    seed.wrapping_sub(config.seed_base) as usize
}

fn unit_vec(x: &DVector<f64>) -> Vec<f64> {
    x.iter().copied().collect()
}

struct RunContext<'a> {
    landscape: Landscape,
    run_id: usize,
    seed: u64,
    elapsed: f64,
    records: Vec<EvaluationRecord>,
    config: &'a ExperimentConfig,
}

impl RunContext<'_> {
    fn record(&mut self, generation: usize, unit: Vec<f64>, t: f64, epsilon: f64, y_true: f64, y_noisy: f64) -> Result<()> {
        self.elapsed += t;
        let native = self.landscape.from_unit(&unit)?;
        self.records.push(EvaluationRecord {
            run_id: self.run_id,
            seed: self.seed,
            generation,
            unit,
            native,
            t,
            epsilon,
            y_true,
            y_noisy,
            elapsed: self.elapsed,
        });
        Ok(())
    }

    /// Measures every candidate once with the given times.
    fn measure_all(
        &mut self,
        generation: usize,
        candidates: &CandidateSet,
        times: &[f64],
        noise: &mut NoiseStreams,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut noisy = Vec::with_capacity(times.len());
        let mut truth = Vec::with_capacity(times.len());
        for (x, &t) in candidates.points.iter().zip(times) {
            let unit = unit_vec(x);
            let m = measure(&self.landscape, &unit, t, &self.config.noise, &mut noise.next_rng())?;
            self.record(generation, unit, m.t, m.epsilon, m.y_true, m.y_noisy)?;
            noisy.push(m.y_noisy);
            truth.push(m.y_true);
        }
        Ok((noisy, truth))
    }
}

/// Executes one optimization run until the simulated budget is spent. A
/// generation that starts before the budget runs out is always completed.
pub fn run_single(config: &ExperimentConfig, seed: u64) -> Result<RunTrace> {
    let run_id = run_index(config, seed);
    run_inner(config, seed, run_id).map_err(|e| Error::Run { run_id, seed, source: Box::new(e) })
}

fn run_inner(config: &ExperimentConfig, seed: u64, run_id: usize) -> Result<RunTrace> {
    config.validate()?;
    let landscape = config.landscape()?;
    let dim = landscape.dim();
    let params = CmaParams::for_dimension(dim)?;
    let budget = config.budget();
    let model_curve = config.model_curve().clone();

    let mut state = CmaState::new(initial_point(&config.init_mode(), dim, seed), config.sigma0)?;
    let initial_mean_cost = landscape.evaluate_unit(&unit_vec(&state.mean))?;
    let mut sampling = substream(seed, Substream::Sampling, 0);
    let mut noise = NoiseStreams::new(seed);

    let ascma = config.ascma_config()?;
    let mut stats: Option<AsCmaState> = match &ascma {
        Some(cfg) => Some(adaptive::init_ascma(&adaptive::unit_bounds(dim), cfg)?),
        None => None,
    };
    let d_max = stats.map(|s| s.d_max);

    let mut ctx = RunContext { landscape: landscape.clone(), run_id, seed, elapsed: 0.0, records: Vec::new(), config };
    let mut generations = Vec::new();

    while ctx.elapsed < budget {
        let generation = state.generation;
        let first_record = ctx.records.len();
        let (next, rho) = match &config.strategy {
            StrategySpec::Static { t_static } => {
                let candidates = cma::ask(&state, &params, &mut sampling)?;
                let times = vec![*t_static; candidates.len()];
                let (noisy, truth) = ctx.measure_all(generation, &candidates, &times, &mut noise)?;
                (cma::update(&state, &params, &candidates, &noisy)?, spearman_rho(&noisy, &truth).ok())
            }
            StrategySpec::Ascma { .. } => {
                let cfg = ascma.as_ref().expect("AS-CMA config resolved");
                let current = stats.expect("AS-CMA state initialized");
                if Some(current.d_max) != d_max {
                    return Err(Error::NumericalState("d_max changed during the run".into()));
                }
                let candidates = cma::ask(&state, &params, &mut sampling)?;
                let alloc = adaptive::allocate_sample_times(&candidates, &current, cfg, &model_curve)?;
                let (noisy, truth) = ctx.measure_all(generation, &candidates, &alloc.times, &mut noise)?;
                let next = cma::update(&state, &params, &candidates, &noisy)?;
                stats = Some(adaptive::update_stats(&candidates, &noisy, &current)?);
                (next, spearman_rho(&noisy, &truth).ok())
            }
            StrategySpec::Klkg { n0, n_total, t_static } => {
                let kc = KlkgConfig { n0: *n0, n_total: *n_total, t_static: *t_static };
                let out = klkg::run_klkg_generation(
                    &state,
                    &params,
                    &kc,
                    &landscape,
                    &config.noise,
                    &model_curve,
                    &mut sampling,
                    &mut noise,
                )?;
                let mut truth = vec![0.0; out.candidates.len()];
                for s in &out.samples {
                    let unit = unit_vec(&out.candidates.points[s.candidate]);
                    truth[s.candidate] = s.outcome.y_true;
                    ctx.record(generation, unit, s.outcome.t, s.outcome.epsilon, s.outcome.y_true, s.outcome.y_noisy)?;
                }
                let means: Vec<f64> = out.estimates.iter().map(|e| e.mean).collect();
                (out.next, spearman_rho(&means, &truth).ok())
            }
        };
        state = next;
        let block = &ctx.records[first_record..];
        let mean_sample_time = block.iter().map(|r| r.t).sum::<f64>() / block.len() as f64;
        generations.push(GenerationSummary {
            generation,
            elapsed: ctx.elapsed,
            mean_cost: landscape.evaluate_unit(&unit_vec(&state.mean))?,
            sorting_rho: rho,
            mean_sample_time,
            samples: block.len(),
        });
    }

    Ok(RunTrace { run_id, seed, initial_mean_cost, records: ctx.records, generations })
}
