use thiserror::Error;

/// Failures raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate spectrum: eigenvalue gap {gap:.3e} below threshold {threshold:.3e}")]
    DegenerateSpectrum { gap: f64, threshold: f64 },

    #[error("generator is not diagonalizable: left/right overlap {overlap:.3e}")]
    NotDiagonalizable { overlap: f64 },

    #[error("ambiguous eigenpair matching: best overlap {best:.9} vs runner-up {second:.9}")]
    AmbiguousMatching { best: f64, second: f64 },

    #[error("protocol domain exceeded at t = {t}: {reason}")]
    DomainExceeded { t: f64, reason: String },

    #[error("integrator failure: {0}")]
    IntegratorFailure(String),

    #[error("singular denominator in closed-form inertial parameter at t = {t}")]
    SingularDenominator { t: f64 },

    #[error("unphysical state: {0}")]
    UnphysicalState(String),

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("unsupported parameter-space dimension {0}; surface form needs at most 3")]
    UnsupportedDimension(usize),

    #[error("positivity violation at t = {t}: minimum eigenvalue {min_eigenvalue:.3e}")]
    PositivityViolation { t: f64, min_eigenvalue: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable short tag used in manifests and CSV status columns.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateSpectrum { .. } => "DegenerateSpectrum",
            Error::NotDiagonalizable { .. } => "NotDiagonalizable",
            Error::AmbiguousMatching { .. } => "AmbiguousMatching",
            Error::DomainExceeded { .. } => "DomainExceeded",
            Error::IntegratorFailure(_) => "IntegratorFailure",
            Error::SingularDenominator { .. } => "SingularDenominator",
            Error::UnphysicalState(_) => "UnphysicalState",
            Error::NotConverged(_) => "NotConverged",
            Error::UnsupportedDimension(_) => "UnsupportedDimension",
            Error::PositivityViolation { .. } => "PositivityViolation",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}
