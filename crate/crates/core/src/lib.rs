//! Simulation and verification toolkit for kinetic SDEs
//! `dX = Y dt, dY = b(X, Y, mu) dt + sigma dW`, their McKean-Vlasov versions and
//! the associated mean-field particle systems.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the usual double-precision instantiation.

pub mod dissipativity;
pub mod entropy;
pub mod error;
pub mod gaussian;
pub mod harness;
pub mod hypo;
pub mod meanfield;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod sde;
pub mod transport;

pub use entropy::{kl_decay_curve, kl_knn, KlEstimate, KlMethod, KlReference};
pub use error::{Error, Result};
pub use gaussian::{GaussianLaw, LinearModel};
pub use model::{
    lift_to_system, DiffusionSpec, DriftSpec, Ensemble, Interaction, MeanField, Perturbation,
    PhasePoint, SystemDrift,
};
pub use rng::{CounterRng, StreamKey};
pub use scalar::Real;

pub type Ensemble64 = Ensemble<f64>;
pub type DriftSpec64 = DriftSpec<f64>;
pub type DiffusionSpec64 = DiffusionSpec<f64>;
pub type PhasePoint64 = PhasePoint<f64>;
pub use meanfield::{
    chaos_scan, frozen_stationary, picard_fixed_point, rd, simulate_particles, ChaosReference,
    ChaosScanConfig, ChaosScanResult, FixedPointState, PicardConfig,
};
pub use sde::{
    simulate, simulate_coupled, tangent_flow, CoupledPath, EnsemblePath, IntegratorConfig, Scheme,
    TangentFlow,
};
