use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shoal_core::experiment::{run_trial_recorded, trial_seed};
use shoal_core::export::{write_results_csv, write_trials_csv};
use shoal_core::metrics::centroid;
use shoal_core::{builtin_config, run_sweep, run_trial, Builtin, ModelParams};

fn short_config2() -> shoal_core::TrialConfig {
    let mut cfg = builtin_config(Builtin::Config2);
    cfg.horizon = 5.0;
    cfg
}

#[test]
fn same_seed_same_outcome() {
    let mut cfg = short_config2();
    cfg.seed = 77;
    let field = cfg.solve_field().unwrap();
    let a = run_trial(&cfg, &field).unwrap();
    let b = run_trial(&cfg, &field).unwrap();
    assert!(a.same_result(&b), "{a:?} vs {b:?}");
    cfg.seed = 78;
    let c = run_trial(&cfg, &field).unwrap();
    assert!(!a.same_result(&c));
}

#[test]
fn single_step_without_forces_keeps_initial_center() {
    let mut cfg = short_config2();
    cfg.params = ModelParams { attraction: 0.0, alignment: 0.0, avoidance: 0.0, sensitivity: 0.0, noise: 0.0, ..cfg.params };
    cfg.horizon = cfg.params.dt;
    cfg.seed = 11;
    let field = cfg.solve_field().unwrap();
    let outcome = run_trial(&cfg, &field).unwrap();
    let initial = cfg.initial_state(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    assert_eq!(outcome.final_center, centroid(&initial.positions));
}

#[test]
fn recorded_frames_follow_stride() {
    let mut cfg = short_config2();
    cfg.horizon = 1.0;
    let field = cfg.solve_field().unwrap();
    let (outcome, frames) = run_trial_recorded(&cfg, &field, 30).unwrap();
    // Steps 0, 30, 60, 90 and the final step 100.
    assert_eq!(frames.len(), 5);
    assert!((frames.last().unwrap().time - 1.0).abs() < 1e-9);
    assert!(frames.iter().all(|f| f.len() == cfg.n_fish));
    assert_eq!(outcome.final_center, shoal_core::metrics::school_center(frames.last().unwrap()));
}

#[test]
fn singleton_sweep() {
    let cfg = short_config2();
    let field = cfg.solve_field().unwrap();
    let result = run_sweep(&cfg, &field, &[2], 1, 5, 1).unwrap();
    assert_eq!(result.rows.len(), 1);
    assert_eq!(result.trials.len(), 1);
    let row = &result.rows[0];
    assert_eq!(row.failure + row.pre_success + row.success, 1);
    assert_eq!(result.trials[0].seed, trial_seed(5, 2, 0));
}

#[test]
fn sweep_ignores_parallelism() {
    let cfg = short_config2();
    let field = cfg.solve_field().unwrap();
    let serial = run_sweep(&cfg, &field, &[2, 4, 6], 4, 99, 1).unwrap();
    let parallel = run_sweep(&cfg, &field, &[2, 4, 6], 4, 99, 8).unwrap();
    assert_eq!(serial.rows, parallel.rows);
    for (a, b) in serial.trials.iter().zip(&parallel.trials) {
        assert_eq!((a.n_fish, a.trial_index, a.seed), (b.n_fish, b.trial_index, b.seed));
        assert!(a.outcome.same_result(&b.outcome));
    }
    let csv = |r: &shoal_core::ExperimentResult| {
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_results_csv(r, &mut x).unwrap();
        write_trials_csv(r, &mut y).unwrap();
        (x, y)
    };
    assert_eq!(csv(&serial), csv(&parallel));
    for row in &serial.rows {
        assert_eq!(row.failure + row.pre_success + row.success, row.trials);
        let p = row.success_probability();
        assert!((0.0..=1.0).contains(&p));
        assert_eq!(p, row.success as f64 / row.trials as f64);
    }
}
