use thiserror::Error;

/// Errors raised by the simulation and theory layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("integration diverged: H-norm {norm:.3e} exceeds cap {cap:.3e} at t = {time}")]
    Divergence { norm: f64, cap: f64, time: f64 },

    #[error("Newton iteration did not converge from any seed")]
    NoFixedPoints,

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("infeasible scale exponents: {0}")]
    InfeasibleScales(String),

    #[error("numeric underflow: {0}")]
    Underflow(String),

    #[error("time horizon {horizon} exceeded: {what}")]
    HorizonExceeded { horizon: f64, what: String },

    #[error("exit success probability is zero (no large jump leaves the domain)")]
    ZeroExitRate,

    #[error("ray membership too oscillatory: {changes} sign changes on ray {ray} exceed budget {budget}")]
    Oscillatory { ray: usize, changes: usize, budget: usize },

    #[error("test set has positive limit mass on its boundary: {0}")]
    BoundaryMass(String),

    #[error("generator row {row} sums to {sum:.3e}, beyond tolerance")]
    RowSum { row: usize, sum: f64 },

    #[error("statistics: {0}")]
    Statistics(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable snake-case identifier of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Divergence { .. } => "divergence",
            Error::NoFixedPoints => "no_fixed_points",
            Error::Unsupported(_) => "unsupported",
            Error::InfeasibleScales(_) => "infeasible_scales",
            Error::Underflow(_) => "underflow",
            Error::HorizonExceeded { .. } => "horizon_exceeded",
            Error::ZeroExitRate => "zero_exit_rate",
            Error::Oscillatory { .. } => "oscillatory",
            Error::BoundaryMass(_) => "boundary_mass",
            Error::RowSum { .. } => "row_sum",
            Error::Statistics(_) => "statistics",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
