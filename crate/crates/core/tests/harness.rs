use std::path::{Path, PathBuf};

use kinetic_ergo::gaussian::{invariant_law, transition_law, w2_gaussian};
use kinetic_ergo::harness::audit::{random_probes, talagrand_harnack_audit};
use kinetic_ergo::harness::config::{validate_against, SUMMARY_SCHEMA};
use kinetic_ergo::harness::{fit_rate, run_experiment, ExperimentConfig, FitMethod, Window};
use kinetic_ergo::{Error, GaussianLaw, LinearModel};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "kinetic-ergo-harness-{}-{name}",
        std::process::id()
    ));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn d1_model() -> LinearModel<f64> {
    LinearModel::new(
        &DMatrix::from_element(1, 1, 1.0),
        1.0,
        &DMatrix::from_element(1, 1, 2.0),
    )
    .unwrap()
}

fn linear_d1(pipeline: &str) -> Value {
    json!({
        "pipeline": pipeline,
        "seed": 5,
        "drift": {"a": [[1.0]], "gamma": 1.0, "k_b": 1.5},
        "diffusion": {"sigma_sq": [[2.0]]},
    })
}

fn run(v: &Value, dir: &Path) -> kinetic_ergo::Result<kinetic_ergo::harness::Report> {
    run_experiment(&ExperimentConfig::from_value(v)?, dir)
}

#[test]
fn oracle_w2_curve_gives_the_spectral_rate() {
    // B = [[0, 1], [-1, -1]] has eigenvalues (-1 +- i sqrt 3) / 2: rate 1/2, frequency sqrt(3)/2.
    let model = d1_model();
    let limit = invariant_law(&model).unwrap();
    let start = GaussianLaw::new(
        DVector::from_vec(vec![3.0, 0.0]),
        DMatrix::identity(2, 2) * 0.25,
    )
    .unwrap();
    let times: Vec<f64> = (0..=150).map(|k| k as f64 * 0.1).collect();
    let w2: Vec<f64> = times
        .iter()
        .map(|&t| w2_gaussian(&transition_law(&model, &start, t).unwrap(), &limit).unwrap())
        .collect();
    let fit = fit_rate(
        &times,
        &w2,
        0.0,
        Window::Auto {
            omega: 3f64.sqrt() / 2.0,
        },
    )
    .unwrap();
    assert!((fit.lambda_hat / 0.5 - 1.0).abs() < 0.05, "{fit:?}");
    assert!(matches!(fit.method, FitMethod::Envelope { blocks, .. } if blocks >= 2));
    assert!(fit.t_lo < fit.t_hi && fit.residual_rms.is_finite());
}

#[test]
fn ergodicity_classical_reports_rates_and_ratio() {
    let mut v = linear_d1("ergodicity-classical");
    v["integrator"] = json!({"dt": 0.005, "t_end": 15.0});
    v["ergodicity"] = json!({"n": 2000, "initial_mean": [1000.0, 0.0]});
    let dir = scratch("ergodicity");
    let report = run(&v, &dir).unwrap();
    let r = &report.summary["results"];
    let (w2, kl, ratio) = (
        r["w2_rate"].as_f64().unwrap(),
        r["kl_rate"].as_f64().unwrap(),
        r["ratio"].as_f64().unwrap(),
    );
    assert!((ratio - kl / w2).abs() < 1e-12);
    assert!((1.7..=2.3).contains(&ratio), "{ratio}");
    assert!((w2 / 0.5 - 1.0).abs() < 0.1, "{w2}");
    assert!(report.passed, "{:?}", report.checks);
    for f in ["data/decay.csv", "plots/decay.svg", "summary.json"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
}

#[test]
fn runs_are_reproducible_and_summaries_validate() {
    let mut v = linear_d1("ergodicity-classical");
    v["integrator"] = json!({"dt": 0.01, "t_end": 4.0});
    v["ergodicity"] = json!({"n": 400, "initial_mean": [5.0, 0.0], "estimator": "sample-based", "floor_replicates": 2});
    let (a, b) = (scratch("repro-a"), scratch("repro-b"));
    let ra = run(&v, &a).unwrap();
    run(&v, &b).unwrap();
    for f in &ra.files {
        if f.ends_with(".csv") {
            assert_eq!(
                std::fs::read(a.join(f)).unwrap(),
                std::fs::read(b.join(f)).unwrap(),
                "{f}"
            );
        }
    }
    let text = std::fs::read_to_string(a.join("summary.json")).unwrap();
    let summary: Value = serde_json::from_str(&text).unwrap();
    validate_against(SUMMARY_SCHEMA, &summary).unwrap();
    assert_eq!(summary, ra.summary);
}

#[test]
fn dissipativity_falsifies_repulsion_with_a_witness() {
    let mut v = linear_d1("dissipativity");
    v["drift"] = json!({"a": [[-1.0]], "gamma": 0.0, "k_b": 1.0});
    v["dissipativity"] =
        json!({"cert": {"theta": 0.25, "r": 1.0, "r0": 0.5, "R": 1.0}, "trials": 100000});
    let report = run(&v, &scratch("falsify")).unwrap();
    assert!(!report.passed);
    let w = &report.summary["results"]["witness"];
    assert!(w["z"].is_array() && w["zbar"].is_array(), "{w}");
    assert!(w["lhs"].as_f64().unwrap() > w["bound"].as_f64().unwrap());
    assert_eq!(report.summary["results"]["cert"]["status"], "falsified");
}

#[test]
fn dissipativity_certifies_and_searches_the_damped_oscillator() {
    let mut v = linear_d1("dissipativity");
    v["dissipativity"] =
        json!({"cert": {"theta": 0.25, "r": 1.0, "r0": 0.5, "R": 1.0}, "min_theta": 0.2});
    assert!(run(&v, &scratch("certify")).unwrap().passed);
    v["dissipativity"] = json!({"trials": 20000, "min_theta": 0.1});
    let report = run(&v, &scratch("search")).unwrap();
    assert!(report.passed, "{:?}", report.checks);
}

#[test]
fn empty_n_list_is_rejected_before_any_compute() {
    let mut v = linear_d1("chaos-scan");
    v["integrator"] = json!({"dt": 0.01, "t_end": 10.0});
    v["chaos"] = json!({"n_values": [], "replicates": 2});
    let dir = scratch("empty-n");
    assert!(matches!(
        ExperimentConfig::from_value(&v),
        Err(Error::Config(_))
    ));
    assert!(!dir.exists());
}

#[test]
fn module_errors_carry_the_pipeline_name() {
    let mut v = linear_d1("ergodicity-classical");
    v["drift"]["interaction"] = json!({"name": "linear_attraction", "params": [0.1]});
    v["drift"]["k_b"] = json!(1.6);
    v["integrator"] = json!({"dt": 0.01, "t_end": 1.0});
    v["ergodicity"] = json!({"n": 100, "initial_mean": [0.0, 0.0]});
    match run(&v, &scratch("wrapped")) {
        Err(e @ Error::Pipeline { .. }) => {
            assert!(e.to_string().starts_with("ergodicity-classical:"));
            assert!(matches!(e.root(), Error::Config(_)));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn hypo_and_fixed_point_pipelines_pass_on_linear_models() {
    let mut v = linear_d1("hypo-verify");
    v["hypo"] = json!({
        "c_pi": 1.0,
        "t_grid": [0.0, 0.5, 1.0, 4.0],
        "z_trials": 2000,
        "probes": 10000,
        "functional": {"test_function": {"kind": "quadratic", "q": [[1.0, 0.0], [0.0, 0.0]]}, "times": [0.0, 1.0, 2.0]}
    });
    let report = run(&v, &scratch("hypo")).unwrap();
    assert!(report.passed, "{:?}", report.checks);

    let mut v = linear_d1("mv-fixed-point");
    v["drift"]["interaction"] = json!({"name": "linear_attraction", "params": [0.05]});
    v["drift"]["k_b"] = json!(1.6);
    v["integrator"] = json!({"dt": 0.01, "t_end": 20.0});
    v["mean_field"] =
        json!({"n_inner": 1024, "relax_t": 20.0, "tol": 1e-6, "covariance_tolerance": 0.15});
    let report = run(&v, &scratch("fixed-point")).unwrap();
    assert!(report.passed, "{:?}", report.checks);
}

#[test]
fn talagrand_audit_on_random_probes() {
    let model = d1_model();
    let probes = random_probes(&model, 100, 1.0, 3).unwrap();
    let audit = talagrand_harnack_audit(&model, 1.0, &probes, 3).unwrap();
    assert_eq!(audit.violations, 0);
    // Invariant law is standard normal: C = 1.
    assert!((audit.c_talagrand - 1.0).abs() < 1e-12);
    assert!(audit.max_talagrand_ratio <= 1.0);

    let other = random_probes(&model, 100, 1.0, 4).unwrap();
    let c1_other = talagrand_harnack_audit(&model, 1.0, &other, 4)
        .unwrap()
        .harnack_c1_fitted;
    let c1 = audit.harnack_c1_fitted;
    assert!(c1.is_finite() && c1 >= audit.harnack_c1);
    assert!((c1_other / c1 - 1.0).abs() < 0.1, "{c1} vs {c1_other}");
}

#[test]
fn audit_of_the_invariant_law_is_zero_on_both_sides() {
    let model = d1_model();
    let mu = invariant_law(&model).unwrap();
    let audit = talagrand_harnack_audit(&model, 1.0, &[mu], 1).unwrap();
    assert!(audit.rows[0].w2_sq.abs() < 1e-12 && audit.rows[0].kl.abs() < 1e-12);
    assert!(audit.rows[0].holds);
    assert!(audit.harnack_ratios.is_empty());
}
