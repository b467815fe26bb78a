use thiserror::Error;

/// Errors raised by the numerical layers.
///
/// Every variant carries enough context to be reported by the CLI as a
/// machine-readable error object; [`Error::module`] names the layer that
/// produced it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ill-conditioned matrix in {context}: eigenvalue ratio {ratio:.3e}")]
    Conditioning { context: String, ratio: f64 },

    #[error("degenerate lambda pair {index}: lambda = {lambda:.3e}")]
    DegeneratePair { index: usize, lambda: f64 },

    #[error("unsupported transition F={f} -> F'={f_prime}")]
    UnsupportedTransition { f: String, f_prime: String },

    #[error("invalid overlap |z| = {0} (must be < 1)")]
    InvalidOverlap(f64),

    #[error("step size underflow at theta = {theta:.6} (h = {step:.3e})")]
    Stiffness { theta: f64, step: f64 },

    #[error("transfer map not unitary: max deviation {deviation:.3e}")]
    IntegrationAccuracy { deviation: f64 },

    #[error("norm drift {drift:.3e} exceeds propagation limit")]
    PropagationAccuracy { drift: f64 },

    #[error("internal consistency failure: {0}")]
    InternalConsistency(String),
}

impl Error {
    /// Name of the module that raises this error class.
    pub fn module(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "input",
            Error::Conditioning { .. } => "linalg",
            Error::DegeneratePair { .. } | Error::InternalConsistency(_) => "decomp",
            Error::UnsupportedTransition { .. } => "atom",
            Error::InvalidOverlap(_) | Error::Stiffness { .. } | Error::IntegrationAccuracy { .. } => "passage",
            Error::PropagationAccuracy { .. } => "oracle",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
