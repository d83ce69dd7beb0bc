//! Experiment configuration: JSON schema validation followed by typed parsing.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{DiffusionConfig, DriftConfig};
use crate::sde::{IntegratorConfig, Scheme};

/// JSON schema every configuration must satisfy.
pub const CONFIG_SCHEMA: &str = include_str!("../../schema/experiment-config.schema.json");
/// JSON schema of `summary.json`.
pub const SUMMARY_SCHEMA: &str = include_str!("../../schema/summary.schema.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    ErgodicityClassical,
    ErgodicityMv,
    ChaosScan,
    HypoVerify,
    Dissipativity,
    MvFixedPoint,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::ErgodicityClassical => "ergodicity-classical",
            Pipeline::ErgodicityMv => "ergodicity-mv",
            Pipeline::ChaosScan => "chaos-scan",
            Pipeline::HypoVerify => "hypo-verify",
            Pipeline::Dissipativity => "dissipativity",
            Pipeline::MvFixedPoint => "mv-fixed-point",
        }
    }
}

impl std::str::FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.into()))
            .map_err(|_| Error::Config(format!("unknown pipeline `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSettings {
    #[serde(default)]
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub allow_large_step: bool,
}

impl IntegratorSettings {
    pub fn build(&self, seed: u64) -> Result<IntegratorConfig<f64>> {
        let cfg = IntegratorConfig::new(self.scheme, self.dt, self.t_end, seed)?;
        Ok(if self.allow_large_step {
            cfg.with_large_step()
        } else {
            cfg
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Closed-form distances between fitted Gaussians and the oracle law.
    #[default]
    GaussianFit,
    /// Exact OT and k-NN entropy against a simulated reference ensemble.
    SampleBased,
}

fn default_scale() -> f64 {
    0.5
}
fn default_record_every() -> f64 {
    0.1
}
fn default_k() -> usize {
    crate::entropy::DEFAULT_K
}
fn default_floor_reps() -> usize {
    8
}
fn default_rate_tol() -> f64 {
    0.1
}
fn default_ratio_window() -> [f64; 2] {
    [1.7, 2.3]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicitySettings {
    pub n: usize,
    /// Mean of the Gaussian initial law, `(x, y)` stacked.
    pub initial_mean: Vec<f64>,
    /// Standard deviation of the isotropic initial law.
    #[serde(default = "default_scale")]
    pub initial_scale: f64,
    #[serde(default = "default_record_every")]
    pub record_every: f64,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default = "default_k")]
    pub knn_k: usize,
    /// Independent draws used to measure the estimator floor.
    #[serde(default = "default_floor_reps")]
    pub floor_replicates: usize,
    /// Accepted relative error of the fitted W2 rate against the oracle rate.
    #[serde(default = "default_rate_tol")]
    pub rate_tolerance: f64,
    #[serde(default = "default_ratio_window")]
    pub ratio_window: [f64; 2],
}

fn default_n_inner() -> usize {
    2048
}
fn default_tol() -> f64 {
    1e-3
}
fn default_max_iter() -> usize {
    12
}
fn default_cov_tol() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldSettings {
    #[serde(default = "default_n_inner")]
    pub n_inner: usize,
    /// Relaxation horizon; `10 / theta` when absent.
    #[serde(default)]
    pub relax_t: Option<f64>,
    /// Dissipativity rate used for the default horizon.
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_cov_tol")]
    pub covariance_tolerance: f64,
}

impl Default for MeanFieldSettings {
    fn default() -> Self {
        Self {
            n_inner: default_n_inner(),
            relax_t: None,
            theta: None,
            tol: default_tol(),
            max_iter: default_max_iter(),
            covariance_tolerance: default_cov_tol(),
        }
    }
}

fn default_max_ratio() -> f64 {
    3.0
}
fn default_slope_window() -> [f64; 2] {
    [-0.65, -0.35]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosSettings {
    pub n_values: Vec<usize>,
    pub replicates: usize,
    /// Burn-in `T_stat`. Defaults to `10 / theta_eff`, then to the integrator horizon.
    #[serde(default)]
    pub burn_in: Option<f64>,
    /// Effective contraction rate of the particle system.
    #[serde(default)]
    pub theta_eff: Option<f64>,
    /// Also scan with the interaction removed and compare the curves.
    #[serde(default)]
    pub compare_without_interaction: bool,
    #[serde(default = "default_max_ratio")]
    pub max_ratio: f64,
    #[serde(default = "default_slope_window")]
    pub slope_window: [f64; 2],
}

fn default_z_trials() -> usize {
    10_000
}
fn default_probes() -> usize {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypoSettings {
    /// Poincare constant; the Gaussian oracle value when absent (linear drifts only).
    #[serde(default)]
    pub c_pi: Option<f64>,
    pub t_grid: Vec<f64>,
    #[serde(default = "default_z_trials")]
    pub z_trials: usize,
    /// Random directions for the `<G_t z, z> <= 2 eps |z|^2` check.
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default)]
    pub functional: Option<FunctionalSettings>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionConfig {
    pub kind: TestFunctionKind,
    #[serde(default)]
    pub v: Option<Vec<f64>>,
    #[serde(default)]
    pub q: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFunctionKind {
    Linear,
    Quadratic,
    BoundedSmooth,
}

fn default_outer() -> usize {
    128
}
fn default_inner() -> usize {
    256
}
fn default_fn_dt() -> f64 {
    0.02
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSettings {
    pub test_function: TestFunctionConfig,
    pub times: Vec<f64>,
    #[serde(default = "default_outer")]
    pub outer: usize,
    #[serde(default = "default_inner")]
    pub inner: usize,
    #[serde(default = "default_fn_dt")]
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertConfig {
    pub theta: f64,
    pub r: f64,
    pub r0: f64,
    #[serde(rename = "R")]
    pub radius: f64,
}

fn default_trials() -> usize {
    100_000
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipativitySettings {
    /// Cert to check; the default grid is searched when absent.
    #[serde(default)]
    pub cert: Option<CertConfig>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub rmax: Option<f64>,
    /// Smallest certified rate that counts as a pass.
    #[serde(default)]
    pub min_theta: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    #[serde(default)]
    pub dir: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: Pipeline,
    #[serde(default)]
    pub seed: u64,
    pub drift: DriftConfig,
    pub diffusion: DiffusionConfig,
    #[serde(default)]
    pub integrator: Option<IntegratorSettings>,
    #[serde(default)]
    pub ergodicity: Option<ErgodicitySettings>,
    #[serde(default)]
    pub mean_field: Option<MeanFieldSettings>,
    #[serde(default)]
    pub chaos: Option<ChaosSettings>,
    #[serde(default)]
    pub hypo: Option<HypoSettings>,
    #[serde(default)]
    pub dissipativity: Option<DissipativitySettings>,
    #[serde(default)]
    pub output: Option<OutputSettings>,
}

/// Validates `instance` against a schema given as JSON text.
pub fn validate_against(schema: &str, instance: &Value) -> Result<()> {
    let schema: Value = serde_json::from_str(schema)?;
    let validator = jsonschema::validator_for(&schema)
        .map_err(|e| Error::Config(format!("invalid schema: {e}")))?;
    let errors: Vec<String> = validator
        .iter_errors(instance)
        .map(|e| format!("{} at `{}`", e, e.instance_path()))
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(errors.join("; ")))
    }
}

fn check(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg.into()))
    }
}

impl ExperimentConfig {
    /// Schema check, typed parse and cross-field checks.
    pub fn from_value(v: &Value) -> Result<Self> {
        validate_against(CONFIG_SCHEMA, v)?;
        let cfg: Self = serde_json::from_value(v.clone())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(&serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks the schema cannot express.
    pub fn validate(&self) -> Result<()> {
        let d = self.drift.a.len();
        if let Some(i) = &self.integrator {
            check(i.dt <= i.t_end, "integrator dt must not exceed t_end")?;
        }
        if let Some(e) = &self.ergodicity {
            check(
                e.initial_mean.len() == 2 * d,
                "ergodicity.initial_mean must have length 2d",
            )?;
            check(e.knn_k < e.n, "ergodicity.knn_k must be below n")?;
            check(
                e.ratio_window[0] < e.ratio_window[1],
                "ergodicity.ratio_window must be increasing",
            )?;
        }
        if let Some(c) = &self.chaos {
            check(
                c.n_values.windows(2).all(|w| w[1] > w[0]),
                "chaos.n_values must be strictly increasing",
            )?;
            check(
                c.slope_window[0] < c.slope_window[1],
                "chaos.slope_window must be increasing",
            )?;
        }
        if let Some(h) = &self.hypo {
            if let Some(f) = &h.functional {
                check(
                    f.times.windows(2).all(|w| w[1] >= w[0]),
                    "hypo.functional.times must be non-decreasing",
                )?;
                let w = 2 * d;
                match f.test_function.kind {
                    TestFunctionKind::Linear | TestFunctionKind::BoundedSmooth => check(
                        f.test_function.v.as_ref().is_some_and(|v| v.len() == w),
                        "test function needs `v` of length 2d",
                    )?,
                    TestFunctionKind::Quadratic => check(
                        f.test_function
                            .q
                            .as_ref()
                            .is_some_and(|q| q.len() == w && q.iter().all(|r| r.len() == w)),
                        "test function needs a 2d x 2d `q`",
                    )?,
                }
            }
        }
        if matches!(
            self.pipeline,
            Pipeline::ErgodicityMv | Pipeline::MvFixedPoint
        ) {
            check(
                self.drift.interaction.is_some(),
                "mean-field pipelines need an interaction",
            )?;
        }
        Ok(())
    }
}
