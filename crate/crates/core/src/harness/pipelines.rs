//! Experiment pipelines. Each writes `data/*.csv`, `plots/*.svg` and a
//! `summary.json` that is validated against the shipped schema before it is written.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{
    validate_against, ChaosSettings, ErgodicitySettings, Estimator, ExperimentConfig, HypoSettings,
    Pipeline, TestFunctionKind, SUMMARY_SCHEMA,
};
use super::fit::{fit_rate, RateFit, Window};
use super::plot::{line_chart, Axes, Series};
use crate::dissipativity::{
    apply_verdict, check_patdi, search_cert, DissipativityCert, SamplingConfig, SearchGrid,
};
use crate::entropy::kl_knn;
use crate::error::{Error, Result};
use crate::gaussian::{
    flow_matrix, invariant_law, kl_gaussian, poincare_constant, transition_law, w2_gaussian,
    GaussianLaw, LinearModel,
};
use crate::hypo::{
    build_constants, build_weight, check_rt_negativity, eval_functional, HypoMc, TestFunction,
};
use crate::meanfield::{
    chaos_scan, picard_fixed_point, relaxation_time, simulate_particles, ChaosReference,
    ChaosScanConfig, ChaosScanResult, PicardConfig,
};
use crate::model::{DiffusionSpec, DriftSpec, Ensemble};
use crate::rng::StreamKey;
use crate::sde::{simulate, IntegratorConfig};
use crate::transport::w2_empirical;

const STREAM_INIT: u64 = 0x11;
const STREAM_REF: u64 = 0x12;
const STREAM_FLOOR: u64 = 0x13;
const STREAM_PICARD: u64 = 0x14;
const STREAM_PROBE: u64 = 0x15;
/// The noise floor is this multiple of the estimator value on exact samples.
const FLOOR_FACTOR: f64 = 3.0;

/// One pass/fail line of a report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub target: String,
}

impl Check {
    fn new(name: &str, passed: bool, value: Option<f64>, target: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            value: value.filter(|v| v.is_finite()),
            target: target.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub pipeline: Pipeline,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Contents of `summary.json`.
    pub summary: Value,
    /// Written files, relative to the output directory.
    pub files: Vec<String>,
}

struct Outcome {
    checks: Vec<Check>,
    results: Value,
    warnings: Vec<String>,
}

struct Outputs {
    root: PathBuf,
    files: Vec<String>,
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

impl Outputs {
    fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root.join("data"))?;
        fs::create_dir_all(root.join("plots"))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    /// Writes `data/<name>`; non-finite values become empty fields.
    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let mut text = header.join(",");
        text.push('\n');
        for r in rows {
            text.push_str(&r.iter().map(|&v| num(v)).collect::<Vec<_>>().join(","));
            text.push('\n');
        }
        let rel = format!("data/{name}");
        fs::write(self.root.join(&rel), text)?;
        self.files.push(rel);
        Ok(())
    }

    fn raw(&mut self, rel: &str, text: &str) -> Result<()> {
        fs::write(self.root.join(rel), text)?;
        self.files.push(rel.into());
        Ok(())
    }

    fn plot(&mut self, name: &str, axes: &Axes<'_>, series: &[Series<'_>]) -> Result<()> {
        let rel = format!("plots/{name}");
        line_chart(&self.root.join(&rel), axes, series)?;
        self.files.push(rel);
        Ok(())
    }
}

fn missing(section: &str) -> Error {
    Error::Config(format!("missing `{section}` section"))
}

/// Runs the configured pipeline and writes its report files into `out_dir`.
///
/// Module errors come back wrapped in [`Error::Pipeline`]; a finished run with
/// failed checks is an `Ok` report with `passed == false`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Report> {
    let pipeline = cfg.pipeline;
    let wrap = |e: Error| Error::Pipeline {
        pipeline: pipeline.name().into(),
        source: Box::new(e),
    };
    let mut out = Outputs::new(out_dir).map_err(wrap)?;
    let outcome = match pipeline {
        Pipeline::ErgodicityClassical => ergodicity(cfg, &mut out, false),
        Pipeline::ErgodicityMv => ergodicity(cfg, &mut out, true),
        Pipeline::ChaosScan => chaos(cfg, &mut out),
        Pipeline::HypoVerify => hypo(cfg, &mut out),
        Pipeline::Dissipativity => dissipativity(cfg, &mut out),
        Pipeline::MvFixedPoint => fixed_point(cfg, &mut out),
    }
    .map_err(wrap)?;
    let passed = outcome.checks.iter().all(|c| c.passed);
    let summary = json!({
        "pipeline": pipeline.name(),
        "seed": cfg.seed,
        "passed": passed,
        "checks": outcome.checks,
        "results": outcome.results,
        "files": out.files,
        "warnings": outcome.warnings,
    });
    validate_against(SUMMARY_SCHEMA, &summary).map_err(wrap)?;
    let text = serde_json::to_string_pretty(&summary).map_err(|e| wrap(e.into()))?;
    fs::write(out_dir.join("summary.json"), text + "\n").map_err(|e| wrap(e.into()))?;
    Ok(Report {
        pipeline,
        passed,
        checks: outcome.checks,
        summary,
        files: out.files,
    })
}

fn specs(cfg: &ExperimentConfig) -> Result<(DriftSpec<f64>, DiffusionSpec<f64>)> {
    let drift = DriftSpec::from_config(&cfg.drift)?;
    let diff = DiffusionSpec::from_config(&cfg.diffusion)?;
    if diff.dim() != drift.dim() {
        return Err(Error::DimensionMismatch(
            "drift and diffusion dimensions".into(),
        ));
    }
    Ok((drift, diff))
}

fn integrator(cfg: &ExperimentConfig) -> Result<IntegratorConfig<f64>> {
    cfg.integrator
        .as_ref()
        .ok_or_else(|| missing("integrator"))?
        .build(cfg.seed)
}

fn record_grid(every: f64, dt: f64, t_end: f64) -> Vec<f64> {
    // Snap to whole steps so the recorded times are exact step multiples.
    let stride = ((every / dt).round() as usize).max(1);
    let steps = (t_end / dt).round() as usize;
    (0..=steps / stride)
        .map(|k| (k * stride) as f64 * dt)
        .collect()
}

/// Closed-form law of the simulated ensemble over time and its limit.
enum Oracle {
    Classical {
        model: LinearModel<f64>,
    },
    /// Linear attraction: the mean follows `A`, the covariance `A + kappa I`.
    MeanField {
        mean_model: LinearModel<f64>,
        cov_model: LinearModel<f64>,
    },
}

impl Oracle {
    fn build(drift: &DriftSpec<f64>, diff: &DiffusionSpec<f64>, mean_field: bool) -> Option<Self> {
        if !mean_field {
            return LinearModel::from_specs(drift, diff)
                .ok()
                .map(|model| Oracle::Classical { model });
        }
        let cov_model = LinearModel::self_consistent(drift, diff).ok()?;
        let mean_model =
            LinearModel::new(drift.linear_position(), drift.gamma(), diff.sigma_sq()).ok()?;
        Some(Oracle::MeanField {
            mean_model,
            cov_model,
        })
    }

    fn limit(&self) -> Result<GaussianLaw<f64>> {
        match self {
            Oracle::Classical { model } => invariant_law(model),
            Oracle::MeanField { cov_model, .. } => invariant_law(cov_model),
        }
    }

    fn law_at(&self, init: &GaussianLaw<f64>, t: f64) -> Result<GaussianLaw<f64>> {
        match self {
            Oracle::Classical { model } => transition_law(model, init, t),
            Oracle::MeanField {
                mean_model,
                cov_model,
            } => {
                let mean = flow_matrix(mean_model, t) * init.mean();
                let centred = GaussianLaw::new(DVector::zeros(init.dim()), init.cov().clone())?;
                GaussianLaw::new(mean, transition_law(cov_model, &centred, t)?.cov().clone())
            }
        }
    }

    /// Slowest decay rate and the oscillation frequency of that mode.
    fn rate(&self) -> (f64, f64) {
        match self {
            Oracle::Classical { model } => (model.decay_rate(), model.oscillation_frequency()),
            Oracle::MeanField {
                mean_model,
                cov_model,
            } => {
                let (a, b) = (mean_model.decay_rate(), cov_model.decay_rate());
                if a <= b {
                    (a, mean_model.oscillation_frequency())
                } else {
                    (b, cov_model.oscillation_frequency())
                }
            }
        }
    }
}

fn run_ensemble(
    drift: &DriftSpec<f64>,
    diff: &DiffusionSpec<f64>,
    init: &Ensemble<f64>,
    integ: &IntegratorConfig<f64>,
    record: &[f64],
    mean_field: bool,
) -> Result<crate::sde::EnsemblePath<f64>> {
    if mean_field {
        simulate_particles(drift, diff, init, integ, record)
    } else {
        simulate(drift, diff, init, integ, None, record)
    }
}

fn fit_json(fit: &Option<RateFit>) -> Value {
    fit.as_ref().map_or(Value::Null, |f| json!(f))
}

fn mean_of(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Largest entry deviation of `cov` from `oracle`: relative for entries above a
/// tenth of the largest oracle entry, relative to that largest entry otherwise.
fn covariance_deviation(cov: &DMatrix<f64>, oracle: &DMatrix<f64>) -> f64 {
    let scale = oracle.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    cov.iter()
        .zip(oracle.iter())
        .map(|(c, o)| {
            if o.abs() > 0.1 * scale {
                (c / o - 1.0).abs()
            } else {
                (c - o).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

fn cross_block_norm(cov: &DMatrix<f64>, d: usize) -> f64 {
    cov.view((0, d), (d, d)).norm()
}

fn ergodicity(cfg: &ExperimentConfig, out: &mut Outputs, mean_field: bool) -> Result<Outcome> {
    let es: &ErgodicitySettings = cfg
        .ergodicity
        .as_ref()
        .ok_or_else(|| missing("ergodicity"))?;
    let (drift, diff) = specs(cfg)?;
    if !mean_field && drift.interaction().is_some() {
        return Err(Error::Config(
            "ergodicity-classical takes a drift without interaction; use ergodicity-mv".into(),
        ));
    }
    let integ = integrator(cfg)?;
    let d = drift.dim();
    let w = 2 * d;
    let mut warnings = Vec::new();

    let init_law = GaussianLaw::new(
        DVector::from_vec(es.initial_mean.clone()),
        DMatrix::identity(w, w) * es.initial_scale.powi(2),
    )?;
    let init = init_law.sample(es.n, StreamKey::new(cfg.seed, STREAM_INIT))?;
    let times = record_grid(es.record_every, integ.dt, integ.t_end);
    let path = run_ensemble(&drift, &diff, &init, &integ, &times, mean_field)?;
    warnings.extend(path.warnings.iter().cloned());

    let oracle = Oracle::build(&drift, &diff, mean_field);
    let limit = oracle.as_ref().map(|o| o.limit()).transpose()?;

    // Estimator curves and their floors.
    let (w2_curve, kl_curve, floor_w2, floor_kl, floor_note) = match es.estimator {
        Estimator::GaussianFit => {
            let limit = limit.as_ref().ok_or_else(|| {
                Error::Config(
                    "the gaussian-fit estimator needs a linear drift; use sample-based".into(),
                )
            })?;
            let mut w2 = Vec::with_capacity(times.len());
            let mut kl = Vec::with_capacity(times.len());
            for snap in &path.snapshots {
                let g = GaussianLaw::fit(snap)?;
                w2.push(w2_gaussian(&g, limit)?);
                kl.push(kl_gaussian(&g, limit)?);
            }
            let mut fw = Vec::new();
            let mut fk = Vec::new();
            for r in 0..es.floor_replicates.max(1) {
                let exact =
                    limit.sample(es.n, StreamKey::new(cfg.seed, STREAM_FLOOR).child(r as u64))?;
                let g = GaussianLaw::fit(&exact)?;
                fw.push(w2_gaussian(&g, limit)?);
                fk.push(kl_gaussian(&g, limit)?);
            }
            (
                w2,
                kl,
                FLOOR_FACTOR * mean_of(&fw),
                FLOOR_FACTOR * mean_of(&fk),
                "3x mean Gaussian-fit estimate on exact invariant samples",
            )
        }
        Estimator::SampleBased => {
            let reference_pair = |key: StreamKey| -> Result<Ensemble<f64>> {
                match &limit {
                    Some(l) => l.sample(es.n, key),
                    None => {
                        // Long run from the same initial law on separate noise.
                        let long = integ
                            .clone()
                            .with_t_end(2.0 * integ.t_end)
                            .with_seed(key.rng().next_u64());
                        let start = init_law.sample(es.n, key.child(1))?;
                        let p = run_ensemble(&drift, &diff, &start, &long, &[], mean_field)?;
                        Ok(p.snapshots.into_iter().last().unwrap())
                    }
                }
            };
            let reference = reference_pair(StreamKey::new(cfg.seed, STREAM_REF))?;
            let mut w2 = Vec::with_capacity(times.len());
            let mut kl = Vec::with_capacity(times.len());
            for snap in &path.snapshots {
                w2.push(w2_empirical(snap, &reference)?);
                kl.push(kl_knn(snap, &reference, es.knn_k)?.value);
            }
            let reps = if limit.is_some() {
                es.floor_replicates.max(1)
            } else {
                1
            };
            let mut fw = Vec::new();
            let mut fk = Vec::new();
            for r in 0..reps {
                let other = reference_pair(StreamKey::new(cfg.seed, STREAM_FLOOR).child(r as u64))?;
                fw.push(w2_empirical(&other, &reference)?);
                fk.push(kl_knn(&other, &reference, es.knn_k)?.value.abs());
            }
            (
                w2,
                kl,
                FLOOR_FACTOR * mean_of(&fw),
                FLOOR_FACTOR * mean_of(&fk),
                "3x mean estimate between independent reference ensembles",
            )
        }
    };

    let (oracle_rate, omega, omega_source) = match &oracle {
        Some(o) => {
            let (r, om) = o.rate();
            (Some(r), om, "oracle")
        }
        None => {
            // Linear part only; a hint for the fit window.
            let om = LinearModel::new(drift.linear_position(), drift.gamma(), diff.sigma_sq())
                .map(|m| m.oscillation_frequency())
                .unwrap_or(0.0);
            (None, om, "linear part of the drift")
        }
    };
    let window = Window::Auto { omega };
    let mut fit =
        |curve: &[f64], floor: f64, what: &str| match fit_rate(&times, curve, floor, window) {
            Ok(f) => Some(f),
            Err(e) => {
                warnings.push(format!("{what} fit: {e}"));
                None
            }
        };
    let w2_fit = fit(&w2_curve, floor_w2, "W2");
    let kl_fit = fit(&kl_curve, floor_kl, "KL");
    let w2_rate = w2_fit.as_ref().map(|f| f.lambda_hat);
    let kl_rate = kl_fit.as_ref().map(|f| f.lambda_hat);
    let ratio = w2_rate.zip(kl_rate).map(|(w, k)| k / w);

    let mut checks = Vec::new();
    if let Some(or) = oracle_rate {
        let rel = w2_rate.map(|r| (r / or - 1.0).abs());
        checks.push(Check::new(
            "w2_rate_vs_oracle",
            rel.is_some_and(|v| v <= es.rate_tolerance),
            rel,
            format!("|w2_rate / {or:.6} - 1| <= {}", es.rate_tolerance),
        ));
    }
    let [lo, hi] = es.ratio_window;
    checks.push(Check::new(
        "kl_to_w2_rate_ratio",
        ratio.is_some_and(|r| r >= lo && r <= hi),
        ratio,
        format!("in [{lo}, {hi}]"),
    ));

    let mut results = json!({
        "w2_rate": w2_rate,
        "kl_rate": kl_rate,
        "ratio": ratio,
        "oracle_rate": oracle_rate,
        "omega": omega,
        "omega_source": omega_source,
        "estimator": es.estimator,
        "noise_floor": {"w2": floor_w2, "kl": floor_kl, "source": floor_note},
        "w2_fit": fit_json(&w2_fit),
        "kl_fit": fit_json(&kl_fit),
        "n": es.n,
        "dt": integ.dt,
        "t_end": integ.t_end,
    });

    if let Some(limit) = &limit {
        let oracle_cross = cross_block_norm(limit.cov(), d);
        let final_cov = path.snapshots.last().unwrap().covariance();
        let empirical_cross = cross_block_norm(&final_cov, d);
        results["invariant_cross_block_norm"] = json!(oracle_cross);
        results["final_cross_block_norm"] = json!(empirical_cross);
        let a = drift.linear_position();
        if (a - a.transpose()).norm() > 0.0 {
            checks.push(Check::new(
                "invariant_cross_block_nonzero",
                oracle_cross > 1e-8,
                Some(oracle_cross),
                "|Sigma_xy|_F > 1e-8",
            ));
        }
    }

    if mean_field {
        let mf = cfg.mean_field.clone().unwrap_or_default();
        let mu0 = init_law.sample(mf.n_inner, StreamKey::new(cfg.seed, STREAM_PICARD))?;
        let p = FixedPointRun {
            drift: &drift,
            diff: &diff,
            integ: &integ,
            limit: limit.as_ref(),
            rate_hint: oracle_rate,
        };
        let (picard_checks, picard_json, picard_warnings) = p.run(cfg, &mu0, out)?;
        checks.extend(picard_checks);
        warnings.extend(picard_warnings);
        results["picard"] = picard_json;
    }

    // Data and plot.
    let mut oracle_w2 = vec![f64::NAN; times.len()];
    let mut oracle_kl = vec![f64::NAN; times.len()];
    if let (Some(o), Some(limit)) = (&oracle, &limit) {
        for (i, &t) in times.iter().enumerate() {
            let law = o.law_at(&init_law, t)?;
            oracle_w2[i] = w2_gaussian(&law, limit)?;
            oracle_kl[i] = kl_gaussian(&law, limit)?;
        }
    }
    let table: Vec<Vec<f64>> = (0..times.len())
        .map(|i| {
            vec![
                times[i],
                w2_curve[i],
                kl_curve[i],
                oracle_w2[i],
                oracle_kl[i],
            ]
        })
        .collect();
    out.csv(
        "decay.csv",
        &["t", "w2", "kl", "w2_oracle", "kl_oracle"],
        &table,
    )?;
    let pts = |v: &[f64]| {
        times
            .iter()
            .cloned()
            .zip(v.iter().cloned())
            .collect::<Vec<_>>()
    };
    let mut series = vec![
        Series {
            label: "W2",
            points: pts(&w2_curve),
        },
        Series {
            label: "KL",
            points: pts(&kl_curve),
        },
    ];
    if oracle.is_some() {
        series.push(Series {
            label: "W2 oracle",
            points: pts(&oracle_w2),
        });
        series.push(Series {
            label: "KL oracle",
            points: pts(&oracle_kl),
        });
    }
    for (label, f) in [("W2 fit", &w2_fit), ("KL fit", &kl_fit)] {
        if let Some(f) = f {
            let line = [f.t_lo, f.t_hi]
                .iter()
                .map(|&t| (t, (f.intercept - f.lambda_hat * t).exp()))
                .collect();
            series.push(Series {
                label,
                points: line,
            });
        }
    }
    let title = if mean_field {
        "Mean-field decay"
    } else {
        "Decay to the invariant law"
    };
    out.plot(
        "decay.svg",
        &Axes {
            title,
            x_label: "t",
            y_label: "distance",
            log_x: false,
            log_y: true,
        },
        &series,
    )?;
    Ok(Outcome {
        checks,
        results,
        warnings,
    })
}

struct FixedPointRun<'a> {
    drift: &'a DriftSpec<f64>,
    diff: &'a DiffusionSpec<f64>,
    integ: &'a IntegratorConfig<f64>,
    limit: Option<&'a GaussianLaw<f64>>,
    /// Rate used for the default relaxation horizon.
    rate_hint: Option<f64>,
}

impl FixedPointRun<'_> {
    /// Picard iteration from `mu0`; writes `data/picard.csv`.
    fn run(
        &self,
        cfg: &ExperimentConfig,
        mu0: &Ensemble<f64>,
        out: &mut Outputs,
    ) -> Result<(Vec<Check>, Value, Vec<String>)> {
        let mf = cfg.mean_field.clone().unwrap_or_default();
        let relax_t = match (mf.relax_t, mf.theta.or(self.rate_hint)) {
            (Some(t), _) => t,
            (None, Some(th)) => relaxation_time(th)?,
            _ => {
                return Err(Error::Config(
                    "mean_field needs relax_t or theta for a nonlinear drift".into(),
                ))
            }
        };
        let picard = PicardConfig {
            relax_t,
            n_inner: mf.n_inner,
            integrator: self
                .integ
                .clone()
                .with_seed(StreamKey::new(cfg.seed, STREAM_PICARD).rng().next_u64()),
        };
        let st = picard_fixed_point(self.drift, self.diff, mu0, mf.tol, mf.max_iter, &picard)?;
        let mut checks = vec![Check::new(
            "picard_converged",
            st.converged,
            Some(st.w2_gap),
            format!("W2 gap < {} within {} iterations", mf.tol, mf.max_iter),
        )];
        let ratios = st.gap_ratios();
        let worst_ratio = ratios.iter().cloned().fold(0.0, f64::max);
        checks.push(Check::new(
            "picard_gap_decay",
            ratios.iter().all(|r| *r < 1.0),
            Some(worst_ratio),
            "every successive gap ratio < 1",
        ));
        let cov = st.mu.covariance();
        let mut json = json!({
            "iterations": st.k,
            "gap_history": st.history,
            "gap_ratios": ratios,
            "relax_t": relax_t,
            "n_inner": mf.n_inner,
            "mean": st.mu.mean().as_slice(),
            "covariance": rows(&cov),
        });
        if let Some(limit) = self.limit {
            let dev = covariance_deviation(&cov, limit.cov());
            checks.push(Check::new(
                "fixed_point_covariance",
                dev <= mf.covariance_tolerance,
                Some(dev),
                format!("entrywise deviation <= {}", mf.covariance_tolerance),
            ));
            json["oracle_covariance"] = json!(rows(limit.cov()));
        }
        out.csv(
            "picard.csv",
            &["k", "w2_gap"],
            &st.history
                .iter()
                .enumerate()
                .map(|(k, g)| vec![(k + 1) as f64, *g])
                .collect::<Vec<_>>(),
        )?;
        Ok((checks, json, st.warnings))
    }
}

fn fixed_point(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Outcome> {
    let (drift, diff) = specs(cfg)?;
    let integ = integrator(cfg)?;
    let mf = cfg.mean_field.clone().unwrap_or_default();
    let oracle = Oracle::build(&drift, &diff, true);
    let limit = oracle.as_ref().map(|o| o.limit()).transpose()?;
    let mu0 = GaussianLaw::standard(2 * drift.dim())
        .sample(mf.n_inner, StreamKey::new(cfg.seed, STREAM_PICARD))?;
    let run = FixedPointRun {
        drift: &drift,
        diff: &diff,
        integ: &integ,
        limit: limit.as_ref(),
        rate_hint: oracle.as_ref().map(|o| o.rate().0),
    };
    let (checks, results, warnings) = run.run(cfg, &mu0, out)?;
    if let Some(g) = results["gap_history"].as_array() {
        let pts: Vec<(f64, f64)> = g
            .iter()
            .enumerate()
            .filter_map(|(k, v)| Some(((k + 1) as f64, v.as_f64()?)))
            .collect();
        out.plot(
            "picard.svg",
            &Axes {
                title: "Picard gaps",
                x_label: "iteration",
                y_label: "W2 gap",
                log_x: false,
                log_y: true,
            },
            &[Series {
                label: "W2(mu_k-1, mu_k)",
                points: pts,
            }],
        )?;
    }
    Ok(Outcome {
        checks,
        results,
        warnings,
    })
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().cloned().collect())
        .collect()
}

fn chaos_reference(
    cfg: &ExperimentConfig,
    drift: &DriftSpec<f64>,
    diff: &DiffusionSpec<f64>,
    integ: &IntegratorConfig<f64>,
    n_max: usize,
    warnings: &mut Vec<String>,
) -> Result<(ChaosReference<f64>, &'static str)> {
    if let Ok(model) = LinearModel::self_consistent(drift, diff) {
        return Ok((
            ChaosReference::Gaussian(invariant_law(&model)?),
            "gaussian oracle",
        ));
    }
    let mf = cfg.mean_field.clone().unwrap_or_default();
    let relax_t = match (mf.relax_t, mf.theta) {
        (Some(t), _) => t,
        (None, Some(th)) => relaxation_time(th)?,
        _ => {
            return Err(Error::Config(
                "a nonlinear chaos scan needs mean_field.relax_t or theta".into(),
            ))
        }
    };
    let n_inner = mf.n_inner.max(n_max);
    let picard = PicardConfig {
        relax_t,
        n_inner,
        integrator: integ
            .clone()
            .with_seed(StreamKey::new(cfg.seed, STREAM_PICARD).rng().next_u64()),
    };
    let mu0 = GaussianLaw::standard(2 * drift.dim())
        .sample(n_inner, StreamKey::new(cfg.seed, STREAM_PICARD))?;
    let st = picard_fixed_point(drift, diff, &mu0, mf.tol, mf.max_iter, &picard)?;
    warnings.extend(st.warnings.iter().cloned());
    if !st.converged {
        warnings.push(format!(
            "reference fixed point not converged (gap {})",
            st.w2_gap
        ));
    }
    Ok((ChaosReference::Samples(st.mu), "picard fixed point"))
}

fn scan_json(s: &ChaosScanResult) -> Value {
    json!(s)
}

fn chaos(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Outcome> {
    let cs: &ChaosSettings = cfg.chaos.as_ref().ok_or_else(|| missing("chaos"))?;
    let (drift, diff) = specs(cfg)?;
    let base = integrator(cfg)?;
    let burn_in = match (cs.burn_in, cs.theta_eff) {
        (Some(t), _) => t,
        (None, Some(th)) => relaxation_time(th)?,
        (None, None) => base.t_end,
    };
    let integ = base.clone().with_t_end(burn_in);
    let n_max = *cs
        .n_values
        .last()
        .ok_or_else(|| Error::Config("empty chaos.n_values".into()))?;
    let mut warnings = Vec::new();

    let (reference, ref_source) =
        chaos_reference(cfg, &drift, &diff, &integ, n_max, &mut warnings)?;
    let scan = chaos_scan(
        &drift,
        &diff,
        &reference,
        &ChaosScanConfig::new(cs.n_values.clone(), integ.clone(), cs.replicates),
    )?;
    let mut text = Vec::new();
    scan.write_csv(&mut text)?;
    out.raw("data/chaos.csv", &String::from_utf8_lossy(&text))?;

    let mut checks = Vec::new();
    let [lo, hi] = cs.slope_window;
    checks.push(Check::new(
        "chaos_slope",
        scan.slope.is_some_and(|s| s >= lo && s <= hi),
        scan.slope,
        format!("in [{lo}, {hi}]"),
    ));
    let all_stationary = scan.stationarity.iter().all(|s| s.stationary);
    let worst_drift = scan
        .stationarity
        .iter()
        .map(|s| s.rel_diff)
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "stationarity",
        all_stationary,
        Some(worst_drift),
        "half-window moment drift below 2% or within 3 replicate SE at every N",
    ));

    let mut results = json!({
        "burn_in": burn_in,
        "reference": ref_source,
        "scan": scan_json(&scan),
    });
    let ns: Vec<f64> = scan.n_values.iter().map(|&n| n as f64).collect();
    let scale = scan.mean_sq_w2[0] / scan.rd_pred[0];
    let mut series = vec![
        Series {
            label: "mean squared W2",
            points: ns
                .iter()
                .cloned()
                .zip(scan.mean_sq_w2.iter().cloned())
                .collect(),
        },
        Series {
            label: "R_d(N), scaled",
            points: ns
                .iter()
                .cloned()
                .zip(scan.rd_pred.iter().map(|r| r * scale))
                .collect(),
        },
    ];

    if cs.compare_without_interaction {
        let plain = drift.clone().with_interaction(None);
        let (plain_ref, _) = chaos_reference(cfg, &plain, &diff, &integ, n_max, &mut warnings)?;
        let baseline = chaos_scan(
            &plain,
            &diff,
            &plain_ref,
            &ChaosScanConfig::new(cs.n_values.clone(), integ.clone(), cs.replicates),
        )?;
        let mut text = Vec::new();
        baseline.write_csv(&mut text)?;
        out.raw("data/chaos_baseline.csv", &String::from_utf8_lossy(&text))?;
        let worst = scan
            .mean_sq_w2
            .iter()
            .zip(&baseline.mean_sq_w2)
            .map(|(a, b)| (a / b).max(b / a))
            .fold(0.0, f64::max);
        checks.push(Check::new(
            "interaction_vs_baseline_ratio",
            worst <= cs.max_ratio,
            Some(worst),
            format!("max over N of the ratio either way <= {}", cs.max_ratio),
        ));
        results["baseline"] = scan_json(&baseline);
        results["max_ratio"] = json!(worst);
        series.push(Series {
            label: "mean squared W2, no interaction",
            points: ns
                .iter()
                .cloned()
                .zip(baseline.mean_sq_w2.iter().cloned())
                .collect(),
        });
    }
    out.plot(
        "chaos.svg",
        &Axes {
            title: "Propagation of chaos",
            x_label: "N",
            y_label: "mean squared W2",
            log_x: true,
            log_y: true,
        },
        &series,
    )?;
    Ok(Outcome {
        checks,
        results,
        warnings,
    })
}

fn test_function(cfg: &super::config::TestFunctionConfig) -> Result<TestFunction> {
    Ok(match cfg.kind {
        TestFunctionKind::Linear => TestFunction::Linear {
            v: cfg.v.clone().unwrap_or_default(),
        },
        TestFunctionKind::BoundedSmooth => TestFunction::BoundedSmooth {
            v: cfg.v.clone().unwrap_or_default(),
        },
        TestFunctionKind::Quadratic => {
            let q =
                crate::model::matrix_from_rows::<f64>(cfg.q.as_deref().unwrap_or_default(), "q")?;
            TestFunction::Quadratic {
                q: (&q + q.transpose()) * 0.5,
            }
        }
    })
}

fn hypo(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Outcome> {
    let hs: &HypoSettings = cfg.hypo.as_ref().ok_or_else(|| missing("hypo"))?;
    let (drift, diff) = specs(cfg)?;
    let d = drift.dim();
    let oracle = LinearModel::from_specs(&drift, &diff).ok();
    let c_pi = match (hs.c_pi, &oracle) {
        (Some(c), _) => c,
        (None, Some(m)) => poincare_constant(&invariant_law(m)?),
        (None, None) => {
            return Err(Error::Config(
                "hypo.c_pi is required for a nonlinear drift".into(),
            ))
        }
    };
    let consts = build_constants(drift.k_b(), diff.delta2(), c_pi)?;
    let mut checks = Vec::new();

    let identity_err =
        (consts.velocity_coefficient() + consts.delta1 / (2.0 * consts.m + 1.0)).abs();
    checks.push(Check::new(
        "constants_identity",
        identity_err <= 1e-12 * consts.delta1.max(1.0),
        Some(identity_err),
        "|eps M - delta1 + delta1 / (2M + 1)| <= 1e-12",
    ));

    let mut rng = StreamKey::new(cfg.seed, STREAM_PROBE).rng();
    let mut worst_cap = 0.0f64;
    for _ in 0..hs.probes {
        let t = hs.t_grid[rng.below(hs.t_grid.len())];
        let g = build_weight(&consts, d, t)?.g;
        let z = DVector::from_fn(2 * d, |_, _| rng.normal());
        worst_cap = worst_cap.max(z.dot(&(&g * &z)) / (2.0 * consts.eps * z.norm_squared()));
    }
    checks.push(Check::new(
        "weight_cap",
        worst_cap <= 1.0 + 1e-12,
        Some(worst_cap),
        "max <G_t z, z> / (2 eps |z|^2) <= 1",
    ));

    let rt = check_rt_negativity(&drift, &consts, &diff, &hs.t_grid, hs.z_trials, cfg.seed)?;
    let worst_rt = rt
        .rows
        .iter()
        .map(|r| r.worst_margin)
        .fold(f64::INFINITY, f64::min);
    checks.push(Check::new(
        "rt_bound",
        rt.holds,
        Some(worst_rt),
        "smallest sampled margin >= 0",
    ));
    out.csv(
        "rt.csv",
        &["t", "alpha", "worst_margin", "eigen_margin"],
        &rt.rows
            .iter()
            .map(|r| vec![r.t, r.alpha, r.worst_margin, r.eigen_margin])
            .collect::<Vec<_>>(),
    )?;

    let mut results = json!({ "constants": consts, "rt": rt });
    if let Some(fs_) = &hs.functional {
        let f = test_function(&fs_.test_function)?;
        let stationary = match &oracle {
            Some(m) => invariant_law(m)?.sample(fs_.outer, StreamKey::new(cfg.seed, STREAM_REF))?,
            None => {
                let integ = integrator(cfg)?;
                let start = GaussianLaw::standard(2 * d)
                    .sample(fs_.outer, StreamKey::new(cfg.seed, STREAM_REF))?;
                simulate(&drift, &diff, &start, &integ, None, &[])?
                    .snapshots
                    .pop()
                    .unwrap()
            }
        };
        let mc = HypoMc {
            outer: fs_.outer,
            inner: fs_.inner,
            dt: fs_.dt,
            seed: cfg.seed,
            ..HypoMc::default()
        };
        let vals = eval_functional(&drift, &diff, &consts, &stationary, &f, &fs_.times, &mc)?;
        let (n0, se0) = (vals[0].value, vals[0].value_se);
        let mut worst = f64::NEG_INFINITY;
        let mut table = Vec::with_capacity(vals.len());
        for p in &vals {
            let b = consts.decay_bound(p.t);
            let slack = 3.0 * (p.value_se.powi(2) + (b * se0).powi(2)).sqrt();
            // Excess over the bound in units of the allowed slack; t = 0 is equal by construction.
            if p.t > 0.0 {
                worst = worst.max((p.value - b * n0) / slack.max(f64::MIN_POSITIVE));
            }
            table.push(vec![p.t, p.value, p.value_se, b * n0]);
        }
        checks.push(Check::new(
            "functional_decay_bound",
            worst <= 1.0,
            Some(worst),
            "N_t <= bound(t) N_0 within 3 standard errors",
        ));
        out.csv(
            "functional.csv",
            &["t", "value", "value_se", "bound"],
            &table,
        )?;
        out.plot(
            "functional.svg",
            &Axes {
                title: "Modified norm",
                x_label: "t",
                y_label: "N_t",
                log_x: false,
                log_y: true,
            },
            &[
                Series {
                    label: "N_t",
                    points: table.iter().map(|r| (r[0], r[1])).collect(),
                },
                Series {
                    label: "bound",
                    points: table.iter().map(|r| (r[0], r[3])).collect(),
                },
            ],
        )?;
        results["functional"] = json!(vals);
    }
    out.plot(
        "rt_margin.svg",
        &Axes {
            title: "R_t margin",
            x_label: "t",
            y_label: "margin",
            log_x: false,
            log_y: false,
        },
        &[Series {
            label: "worst sampled margin",
            points: rt.rows.iter().map(|r| (r.t, r.worst_margin)).collect(),
        }],
    )?;
    Ok(Outcome {
        checks,
        results,
        warnings: Vec::new(),
    })
}

fn dissipativity(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Outcome> {
    let ds = cfg.dissipativity.clone().unwrap_or_default();
    let drift = DriftSpec::<f64>::from_config(&cfg.drift)?;
    let min_theta = ds.min_theta.unwrap_or(0.0);
    let mut checks = Vec::new();
    let cert: Option<DissipativityCert> = match &ds.cert {
        Some(c) => {
            let cert = DissipativityCert::new(c.theta, c.r, c.r0, c.radius)?;
            let sampling = match ds.rmax {
                Some(rmax) => SamplingConfig::new(ds.trials, rmax, cfg.seed),
                None => SamplingConfig::for_cert(&cert, ds.trials, cfg.seed),
            };
            let verdict = check_patdi(&drift, &cert, None, &sampling)?;
            let holds = verdict.holds();
            checks.push(Check::new(
                "cert_holds",
                holds,
                Some(cert.theta),
                format!("no violation in {} sampled pairs", ds.trials),
            ));
            Some(apply_verdict(&cert, &verdict))
        }
        None => {
            let found = search_cert(&drift, &SearchGrid::default(), None, ds.trials, cfg.seed)?;
            checks.push(Check::new(
                "cert_found",
                found.is_some(),
                found.as_ref().map(|c| c.theta),
                "a grid point with positive sampled rate",
            ));
            found
        }
    };
    if let Some(c) = &cert {
        if c.witness.is_none() {
            checks.push(Check::new(
                "theta_at_least",
                c.theta >= min_theta,
                Some(c.theta),
                format!("theta >= {min_theta}"),
            ));
        }
        out.csv(
            "cert.csv",
            &["theta", "r", "r0", "R", "falsified"],
            &[vec![
                c.theta,
                c.r,
                c.r0,
                c.radius,
                f64::from(u8::from(c.witness.is_some())),
            ]],
        )?;
    }
    let results = json!({
        "cert": cert,
        "witness": cert.as_ref().and_then(|c| c.witness.clone()),
        "trials": ds.trials,
    });
    Ok(Outcome {
        checks,
        results,
        warnings: Vec::new(),
    })
}
