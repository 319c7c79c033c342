use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step size {eta} outside the invertibility regime eta <= 1/(2L) = {limit}")]
    RegimeViolation { eta: f64, limit: f64 },

    #[error("quadrature did not converge at order cap {cap}: last estimates {previous} and {last}")]
    QuadratureNonConvergence { cap: usize, previous: f64, last: f64 },

    #[error("Newton iteration did not converge for target {target} after {iterations} iterations")]
    NewtonNonConvergence { target: f64, iterations: usize },

    #[error("no stationary point of the smoothed objective in [{lo}, {hi}]")]
    NoStationaryPoint { lo: f64, hi: f64 },

    #[error("iterate became non-finite or left |w| <= 1e6 at step {step}")]
    Diverged { step: usize },

    #[error("all {trials} trials diverged")]
    AllTrialsDiverged { trials: usize },

    #[error("certificate failed: {0}")]
    CertificateFailed(String),

    #[error("too few usable sweep points: {surviving} (need at least 3)")]
    TooFewSweepPoints { surviving: usize },

    #[error("unknown preset '{name}'; available: {available}")]
    UnknownPreset { name: String, available: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
