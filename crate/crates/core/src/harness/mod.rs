//! Experiment harness: config loading, rate fits, pipelines, reports and plots.

pub mod audit;
pub mod config;
pub mod fit;
pub mod pipelines;
pub mod plot;

pub use audit::{random_probes, talagrand_harnack_audit, AuditReport};
pub use config::{ExperimentConfig, Pipeline};
pub use fit::{fit_rate, FitMethod, RateFit, Window};
pub use pipelines::{run_experiment, Check, Report};
