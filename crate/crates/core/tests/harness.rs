use ascma::harness::io::records_csv;
use ascma::harness::perturb::{study_configs, BASELINE_LABEL};
use ascma::harness::report::{mean_trajectory, time_grid};
use ascma::harness::*;
use ascma::metrics::{summarize_runs, t_test_two_tailed};
use ascma::Error;

fn ankle(strategy: StrategySpec, runs: usize, budget: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new("ankle4", strategy);
    cfg.runs = runs;
    cfg.seed_base = 100;
    cfg.budget_minutes = Some(budget);
    cfg
}

#[test]
fn replay_is_byte_identical() {
    for strategy in [StrategySpec::ascma(), StrategySpec::Static { t_static: 2.0 }, StrategySpec::Klkg { n0: 1, n_total: 20, t_static: 1.0 }] {
        let cfg = ankle(strategy, 1, 150.0);
        let a = run_single(&cfg, 107).unwrap();
        let b = run_single(&cfg, 107).unwrap();
        assert_eq!(records_csv(&a, 4), records_csv(&b, 4));
        assert_ne!(records_csv(&a, 4), records_csv(&run_single(&cfg, 108).unwrap(), 4));
    }
}

#[test]
fn tiny_budget_runs_one_generation() {
    let cfg = ankle(StrategySpec::Static { t_static: 0.5 }, 1, 0.1);
    let trace = run_single(&cfg, 100).unwrap();
    assert_eq!(trace.generations.len(), 1);
    assert_eq!(trace.records.len(), 8);
}

#[test]
fn static_strategy_uses_one_time() {
    let trace = run_single(&ankle(StrategySpec::Static { t_static: 3.5 }, 1, 100.0), 100).unwrap();
    assert!(trace.records.iter().all(|r| r.t == 3.5));
    assert!(trace.is_consistent());
}

#[test]
fn matched_seeds_share_initialization() {
    for landscape in ["ankle4", "rosenbrock4", "sphere20"] {
        let mut a = ExperimentConfig::new(landscape, StrategySpec::ascma());
        let mut s = ExperimentConfig::new(landscape, StrategySpec::Static { t_static: 4.0 });
        a.budget_minutes = Some(30.0);
        s.budget_minutes = Some(30.0);
        for seed in 0..5 {
            let ta = run_single(&a, seed).unwrap();
            let ts = run_single(&s, seed).unwrap();
            // The injected mean is the last candidate of generation 0.
            let dim = a.landscape().unwrap().dim();
            let lambda = ascma::CmaParams::for_dimension(dim).unwrap().lambda;
            assert_eq!(ta.records[lambda - 1].unit, ts.records[lambda - 1].unit);
            assert_eq!(ta.initial_mean_cost, ts.initial_mean_cost);
        }
    }
}

#[test]
fn ankle_starts_from_the_centre() {
    let trace = run_single(&ankle(StrategySpec::ascma(), 1, 10.0), 3).unwrap();
    assert_eq!(trace.records[7].unit, vec![0.5; 4]);
}

#[test]
fn budget_overshoot_is_at_most_one_generation() {
    let cases = [
        (StrategySpec::Static { t_static: 5.5 }, 8.0 * 5.5),
        (StrategySpec::ascma(), 8.0 * 5.5),
        (StrategySpec::Klkg { n0: 1, n_total: 20, t_static: 2.0 }, 20.0 * 2.0),
    ];
    for (strategy, generation_cap) in cases {
        let cfg = ankle(strategy, 1, 200.0);
        for seed in 100..104 {
            let t = run_single(&cfg, seed).unwrap();
            let end = t.end_time();
            assert!(end >= 200.0 && end <= 200.0 + generation_cap, "end {end}");
            let before_last = t.generations[t.generations.len() - 2].elapsed;
            assert!(before_last < 200.0);
        }
    }
}

#[test]
fn klkg_spends_the_generation_budget() {
    let trace = run_single(&ankle(StrategySpec::Klkg { n0: 1, n_total: 20, t_static: 2.0 }, 1, 300.0), 100).unwrap();
    assert!(trace.generations.iter().all(|g| g.samples == 20));
    assert!(trace.is_consistent());
}

#[test]
fn single_run_sweep_equals_run_single() {
    let cfg = ankle(StrategySpec::ascma(), 1, 120.0);
    let store = run_sweep(std::slice::from_ref(&cfg), 2).unwrap();
    assert_eq!(store.strategies[0].traces, vec![run_single(&cfg, 100).unwrap()]);
}

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let sweep = SweepConfig::static_comparison(ankle(StrategySpec::ascma(), 3, 80.0));
    let configs = sweep.expand().unwrap();
    let a = run_sweep(&configs, 1).unwrap();
    let b = run_sweep(&configs, 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.trace_count(), 12 * 3);
    assert_eq!(summarize(&a).unwrap(), summarize(&b).unwrap());
}

#[test]
fn failed_cells_are_recorded() {
    // Costs overflow to infinity, which only surfaces once the run evaluates.
    let mut bad = ExperimentConfig::new("rosenbrock4", StrategySpec::Static { t_static: 1.0 });
    bad.budget_minutes = Some(20.0);
    bad.cost_scale = 1e307;
    let good = ankle(StrategySpec::Static { t_static: 1.0 }, 2, 20.0);
    let store = run_sweep(&[good, bad], 0).unwrap();
    assert_eq!(store.strategies[0].traces.len(), 2);
    assert!(store.strategies[0].failures.is_empty());
    assert!(store.strategies[1].traces.is_empty());
    assert_eq!(store.strategies[1].failures.len(), 1);
    assert_eq!(store.strategies[1].failures[0].kind, "run_failed");
    assert!(store.strategies[1].aggregate.is_none());
}

#[test]
fn persisted_store_reloads_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = ankle(StrategySpec::ascma(), 2, 60.0);
    base.output = Some(dir.path().to_path_buf());
    let sweep = SweepConfig { base, strategies: vec![StrategySpec::Klkg { n0: 1, n_total: 20, t_static: 1.5 }], static_grid: None, include_base: true };
    let store = run_sweep(&sweep.expand().unwrap(), 0).unwrap();
    let loaded = ResultsStore::load(dir.path()).unwrap();
    assert_eq!(loaded, store);
    let text = std::fs::read_to_string(dir.path().join("ascma").join("run_0001.csv")).unwrap();
    assert!(text.starts_with("run_id,seed,generation,u0,u1,u2,u3,x0,x1,x2,x3,t_i,epsilon,y_true,y_noisy,elapsed_min\n"));
}

#[test]
fn report_numbers_match_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let base = ankle(StrategySpec::ascma(), 4, 150.0);
    let sweep = SweepConfig { base, strategies: vec![StrategySpec::Static { t_static: 2.0 }, StrategySpec::Static { t_static: 4.0 }], static_grid: None, include_base: true };
    let store = run_sweep(&sweep.expand().unwrap(), 0).unwrap();
    let rep = report(&store, dir.path()).unwrap();
    let y_star = store.strategies[0].config.landscape().unwrap().y_star();
    let reference = summarize_runs(&store.strategies[0].traces, y_star).unwrap();
    for (row, s) in rep.rows.iter().zip(&store.strategies) {
        let agg = summarize_runs(&s.traces, y_star).unwrap();
        assert_eq!(row.fine_time_mean, agg.fine.time_mean);
        assert_eq!(row.coarse_cost_mean, agg.coarse.cost_mean);
        assert_eq!(row.fine_reliability, agg.fine.reliability);
        assert_eq!(row.mean_sorting_rho, agg.mean_sorting_rho);
        if s.label == "ascma" {
            assert!(row.comparison.is_none());
        } else {
            let c = row.comparison.unwrap();
            assert_eq!(c.fine_time_p, t_test_two_tailed(&agg.fine.times, &reference.fine.times).ok().map(|t| t.p));
        }
    }
    assert_eq!(rep.reference.as_deref(), Some("ascma"));
    assert_eq!(rep.rows.iter().filter(|r| r.best_static).count(), 1);
    for file in ["summary.csv", "report.json", "mean_trajectory.csv", "sorting_accuracy.csv", "sample_time.csv"] {
        assert!(dir.path().join(file).exists(), "{file}");
    }
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn report_edge_cases() {
    let empty = ResultsStore { strategies: Vec::new(), provenance: Provenance::for_configs(&[]).unwrap() };
    assert!(matches!(summarize(&empty), Err(Error::InsufficientData(_))));

    let store = run_sweep(&[ankle(StrategySpec::Static { t_static: 3.0 }, 2, 60.0)], 0).unwrap();
    let rep = summarize(&store).unwrap();
    assert_eq!(rep.rows.len(), 1);
    assert!(rep.rows[0].comparison.is_none());
    assert!(rep.reference.is_none());
}

#[test]
fn mean_trajectory_steps_through_generations() {
    let store = run_sweep(&[ankle(StrategySpec::Static { t_static: 1.0 }, 1, 40.0)], 0).unwrap();
    let traces = &store.strategies[0].traces;
    let refs: Vec<_> = traces.iter().collect();
    let grid = time_grid(&refs, 5);
    let traj = mean_trajectory(traces, &grid);
    assert_eq!(traj[0], traces[0].initial_mean_cost);
    assert_eq!(*traj.last().unwrap(), traces[0].generations.last().unwrap().mean_cost);
}

#[test]
fn perturbation_study_shape() {
    let mut base = ankle(StrategySpec::ascma(), 2, 60.0);
    let study = PerturbConfig { base: base.clone(), targets: vec![PerturbTarget::YHat], errors: DEFAULT_PERTURBATIONS.to_vec() };
    let store = perturbation_study(&study, 0).unwrap();
    assert_eq!(store.strategies.len(), 5);
    assert_eq!(store.trace_count(), 10);
    let labels: Vec<&str> = store.strategies.iter().map(|s| s.label.as_str()).collect();
    assert_eq!(labels, ["baseline", "y_hat+0.10", "y_hat-0.10", "y_hat+0.25", "y_hat-0.25"]);

    // Error 0 reproduces the unperturbed configuration exactly.
    let plain = run_sweep(std::slice::from_ref(&base), 0).unwrap();
    let baseline = store.get(BASELINE_LABEL).unwrap();
    for (a, b) in baseline.traces.iter().zip(&plain.strategies[0].traces) {
        assert_eq!(records_csv(a, 4), records_csv(b, 4));
    }
    assert_eq!(trajectory_deltas(&store).unwrap().len(), 4);

    base.strategy = StrategySpec::Static { t_static: 2.0 };
    let bad = PerturbConfig { base, targets: vec![PerturbTarget::YHat], errors: vec![0.0] };
    assert!(matches!(study_configs(&bad), Err(Error::InvalidStudy(_))));
}

#[test]
fn optimistic_noise_model_shortens_first_generation() {
    let base = ankle(StrategySpec::ascma(), 1, 30.0);
    let study = PerturbConfig { base, targets: vec![PerturbTarget::NoiseCurve], errors: vec![0.0, -0.25] };
    let configs = study_configs(&study).unwrap();
    assert_eq!(configs[1].label(), "noise_curve-0.25");
    for seed in 100..110 {
        let base_trace = run_single(&configs[0], seed).unwrap();
        let low = run_single(&configs[1], seed).unwrap();
        let first = |t: &ascma::RunTrace| t.records.iter().filter(|r| r.generation == 0).map(|r| r.t).collect::<Vec<_>>();
        let (a, b) = (first(&base_trace), first(&low));
        // Generation 0 candidates are identical, so only the model differs.
        assert!(a.iter().zip(&b).all(|(x, y)| y <= x));
        assert!(a.iter().zip(&b).any(|(x, y)| y < x));
    }
}

#[test]
fn config_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    let cfg = ankle(StrategySpec::Klkg { n0: 2, n_total: 24, t_static: 2.5 }, 3, 90.0);
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(ExperimentConfig::from_path(&path).unwrap(), cfg);
    std::fs::write(&path, "{ not json").unwrap();
    assert!(matches!(ExperimentConfig::from_path(&path), Err(Error::Format { .. })));
    assert!(matches!(ExperimentConfig::from_path(&dir.path().join("missing.json")), Err(Error::Io { .. })));
}
