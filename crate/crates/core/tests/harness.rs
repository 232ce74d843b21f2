use std::path::Path;

use stochetd::harness::{emit_report, fit_all, records_from_csv, records_to_csv, universal_blowup, THREADS_ENV};
use stochetd::*;

fn smoke() -> ExperimentConfig {
    ExperimentConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.json")).unwrap()
}

fn rec(scheme: &str, dt: f64, err: f64, blowups: usize) -> ConvergenceRecord {
    ConvergenceRecord {
        scheme: scheme.into(),
        dt,
        rms_error: err,
        rel_error: err,
        n_success: 4 - blowups,
        n_blowup: blowups,
        cpu_seconds: 0.0,
        setup_seconds: 0.0,
    }
}

/// Errors exactly `dt^order`, with `dt = 2^-k`.
fn synthetic(scheme: &str, order: f64, ks: std::ops::Range<i32>) -> Vec<ConvergenceRecord> {
    ks.map(|k| {
        let dt = 2f64.powi(-k);
        rec(scheme, dt, dt.powf(order), 0)
    })
    .collect()
}

#[test]
fn config_defaults_and_step_sizes() {
    let cfg = smoke();
    assert_eq!(cfg.dts(), vec![1e-3, 5e-4, 2.5e-4]);
    assert_eq!(cfg.dt_fine(), 2.5e-4);
    cfg.validate().unwrap();

    let mut bare: serde_json::Value = serde_json::to_value(&cfg).unwrap();
    for k in ["ensemble_size", "repeats", "error_metric", "contour", "seed", "name"] {
        bare.as_object_mut().unwrap().remove(k);
    }
    let back = ExperimentConfig::from_json(&bare.to_string()).unwrap();
    assert_eq!((back.ensemble_size, back.repeats, back.seed), (16, 5, 0));
    assert_eq!(back.error_metric, ErrorMetric::FinalTime);
    assert_eq!(back.contour, ContourConfig::default());
}

#[test]
fn invalid_configs_are_rejected() {
    let edits: Vec<Box<dyn Fn(&mut ExperimentConfig)>> = vec![
        Box::new(|c| c.schemes.clear()),
        Box::new(|c| c.levels.clear()),
        Box::new(|c| c.levels.push(41)),
        Box::new(|c| c.dt_base = 0.0),
        Box::new(|c| c.t_max = -1.0),
        Box::new(|c| c.t_max = 0.0041),
        Box::new(|c| c.ensemble_size = 0),
        Box::new(|c| c.repeats = 0),
        Box::new(|c| c.reference = Reference::FineNumerical { scheme: SchemeId::Srk4, refinement_factor: 3 }),
        Box::new(|c| c.reference = Reference::FineNumerical { scheme: SchemeId::Setdm01, refinement_factor: 2 }),
        Box::new(|c| c.contour.n_points = 4),
    ];
    for (i, edit) in edits.iter().enumerate() {
        let mut cfg = smoke();
        edit(&mut cfg);
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))), "edit {i}");
    }
    let mut cfg = smoke();
    cfg.model = ModelConfig::kdv_unit(32, NoiseBasisSpec::None);
    assert!(run_strong_convergence(&cfg).is_err());
}

#[test]
fn sweeps_are_reproducible_across_thread_counts() {
    let cfg = smoke();
    let a = run_strong_convergence(&cfg).unwrap();
    std::env::set_var(THREADS_ENV, "1");
    let b = run_strong_convergence(&cfg).unwrap();
    std::env::remove_var(THREADS_ENV);
    assert_eq!(records_to_csv(&a), records_to_csv(&b));
    assert_eq!(a.len(), 9);
    assert!(a.iter().all(|r| r.n_success == 4 && r.rms_error > 0.0 && r.cpu_seconds == 0.0));

    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(records_to_csv(&a), records_to_csv(&run_strong_convergence(&other).unwrap()));
}

#[test]
fn zero_horizon_has_zero_error() {
    let mut cfg = smoke();
    cfg.t_max = 0.0;
    for r in run_strong_convergence(&cfg).unwrap() {
        assert_eq!(r.rms_error, 0.0);
        assert_eq!(r.n_success, 4);
    }
}

#[test]
fn space_time_metric_and_timings() {
    let mut cfg = smoke();
    cfg.error_metric = ErrorMetric::SpaceTime;
    cfg.schemes = vec![SchemeId::Setdrk4];
    let st = run_strong_convergence(&cfg).unwrap();
    assert!(st.iter().all(|r| r.rms_error.is_finite() && r.rms_error > 0.0));

    let timed = run_efficiency(&cfg, 2).unwrap();
    assert!(timed.iter().all(|r| r.cpu_seconds > 0.0));
    assert!(run_efficiency(&cfg, 0).is_err());
}

#[test]
fn fit_recovers_synthetic_orders() {
    let mut records = synthetic("a", 2.0, 3..9);
    records.extend(synthetic("b", 0.5, 3..7));
    let a = fit_order(&records, "a", LevelWindow::All).unwrap();
    assert!((a.slope - 2.0).abs() < 1e-12 && (a.r_squared - 1.0).abs() < 1e-12 && a.intercept.abs() < 1e-12);
    assert_eq!(a.levels_used.len(), 6);
    assert_eq!(fit_order(&records, "a", LevelWindow::Finest(3)).unwrap().levels_used, vec![2f64.powi(-8), 2f64.powi(-7), 2f64.powi(-6)]);
    assert_eq!(fit_order(&records, "a", LevelWindow::Coarsest(4)).unwrap().levels_used.len(), 4);
    assert_eq!(fit_order(&records, "a", LevelWindow::Range(2f64.powi(-6), 2f64.powi(-4))).unwrap().levels_used.len(), 3);
    assert!(matches!(fit_order(&records, "a", LevelWindow::Finest(2)), Err(Error::InsufficientData(_))));
    assert!(fit_order(&records, "c", LevelWindow::All).is_err());

    let fits = fit_all(&records, LevelWindow::All);
    assert_eq!(fits.len(), 2);
    assert!((fits[1].slope - 0.5).abs() < 1e-12);
}

#[test]
fn failed_cells_are_skipped() {
    let mut records = synthetic("a", 3.0, 2..6);
    records.push(rec("a", 0.5, 1e9, 3));
    records.push(rec("a", 2f64.powi(-7), f64::NAN, 0));
    let fit = fit_order(&records, "a", LevelWindow::All).unwrap();
    assert!((fit.slope - 3.0).abs() < 1e-12);
    assert_eq!(fit.levels_used.len(), 4);
    assert!(!universal_blowup(&records));
    assert!(universal_blowup(&[rec("a", 0.1, 1.0, 3), rec("b", 0.1, 1.0, 4)]));
    assert!(!universal_blowup(&[]));
}

#[test]
fn csv_round_trip_is_exact() {
    let mut records = synthetic("setdrk4", 4.0, 1..5);
    records[2].cpu_seconds = 0.123_456_789_012_345_67;
    records[3].n_blowup = 1;
    let back = records_from_csv(&records_to_csv(&records)).unwrap();
    assert_eq!(back, records);
    assert!(records_from_csv("scheme,dt\nx,1").is_err());
    assert!(records_from_csv(&format!("{}\nsrk4,1,2,3\n", harness::CSV_HEADER)).is_err());
}

#[test]
fn report_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke();
    let records = synthetic("ifsrk4", 4.0, 3..7);
    let fits = fit_all(&records, LevelWindow::All);
    let (csv, json) = emit_report(&records, &fits, Some(&cfg), &dir.path().join("nested"), "run").unwrap();
    assert_eq!(records_from_csv(&std::fs::read_to_string(csv).unwrap()).unwrap(), records);
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(side["seed"], 3);
    assert_eq!(side["fits"][0]["scheme"], "ifsrk4");
    assert_eq!(side["design"]["contour_for_all_eigenvalues"], true);
    assert!(matches!(emit_report(&[], &[], None, dir.path(), "x"), Err(Error::InsufficientData(_))));
}
