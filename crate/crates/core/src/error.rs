use thiserror::Error;

/// Structured failures raised by every module.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("an interaction kernel is present but no measure was supplied")]
    MissingMeasure,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("state diverged at step {step} (t = {time})")]
    Divergence { step: usize, time: f64 },
    #[error("drift matrix is not Hurwitz (spectral abscissa {0})")]
    NotHurwitz(f64),
    #[error("singular covariance: {0}")]
    SingularCovariance(String),
    #[error("unequal sample counts {n} and {m}; use w2_empirical_general")]
    UnequalCounts { n: usize, m: usize },
    #[error(
        "transport problem of size {n}x{m} exceeds the cap of {cap} cells; subsample the ensembles"
    )]
    TooLarge { n: usize, m: usize, cap: usize },
    #[error("degenerate sampling range: R = {r} must be below rmax = {rmax}")]
    DegenerateSampling { r: f64, rmax: f64 },
    #[error("interaction budget exhausted: effective rate {theta_eff} <= 0")]
    InteractionBudgetExhausted { theta_eff: f64 },
    #[error("K_b underdeclared: declared {declared}, observed {observed}")]
    KbUnderdeclared { declared: f64, observed: f64 },
    #[error("insufficient points for a rate fit: {found} above the floor, need 4")]
    InsufficientPoints { found: usize },
    #[error("fixed-point iteration is not contracting (gap history {history:?})")]
    NonContraction { history: Vec<f64> },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("empty search grid")]
    EmptyGrid,
    #[error("config: {0}")]
    Config(String),
    #[error("{pipeline}: {source}")]
    Pipeline {
        pipeline: String,
        #[source]
        source: Box<Error>,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// The innermost error, past any pipeline context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Pipeline { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
