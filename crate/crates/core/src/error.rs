use thiserror::Error;

/// Errors raised by the numerical engines and problem validation.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("non-finite value encountered: {0}")]
    NumericalBlowup(String),
    #[error("coefficient is not positive definite: {0}")]
    PositivityViolation(String),
    #[error("boundary data violates the compatibility condition: {0}")]
    CompatibilityViolation(String),
    #[error("end-coupling matrix is not symplectic: {0}")]
    NotSymplectic(String),
    #[error("angle out of range: {0}")]
    AngleOutOfRange(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("resolution cap exceeded: {0}")]
    ResolutionExceeded(String),
    #[error("a-posteriori verification failed: {0}")]
    VerificationFailed(String),
    #[error("shooting sweep and discretization disagree: {0}")]
    ValidatorDisagreement(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("path is not monotone: {0}")]
    NotMonotone(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("continuation stalled: {0}")]
    ContinuationStalled(String),
    #[error("Newton iteration diverged: {0}")]
    NewtonDiverged(String),
    #[error("singular Jacobian at continuation parameter {lambda}: {detail}")]
    SingularJacobian { lambda: f64, detail: String },
    #[error("potential is not strongly convex: {0}")]
    NotStronglyConvex(String),
    #[error("line search failed: {0}")]
    LineSearchFailed(String),
    #[error("primal residual too large: {0}")]
    PrimalResidualLarge(String),
    #[error("invalid problem description: {0}")]
    Config(String),
}

impl Error {
    /// Stable variant name, used in machine-readable reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidMatrix(_) => "InvalidMatrix",
            Error::NumericalBlowup(_) => "NumericalBlowup",
            Error::PositivityViolation(_) => "PositivityViolation",
            Error::CompatibilityViolation(_) => "CompatibilityViolation",
            Error::NotSymplectic(_) => "NotSymplectic",
            Error::AngleOutOfRange(_) => "AngleOutOfRange",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::ResolutionExceeded(_) => "ResolutionExceeded",
            Error::VerificationFailed(_) => "VerificationFailed",
            Error::ValidatorDisagreement(_) => "ValidatorDisagreement",
            Error::NoConvergence(_) => "NoConvergence",
            Error::NotMonotone(_) => "NotMonotone",
            Error::DomainError(_) => "DomainError",
            Error::ContinuationStalled(_) => "ContinuationStalled",
            Error::NewtonDiverged(_) => "NewtonDiverged",
            Error::SingularJacobian { .. } => "SingularJacobian",
            Error::NotStronglyConvex(_) => "NotStronglyConvex",
            Error::LineSearchFailed(_) => "LineSearchFailed",
            Error::PrimalResidualLarge(_) => "PrimalResidualLarge",
            Error::Config(_) => "Config",
        }
    }

    /// True for errors caused by malformed or inadmissible input rather than
    /// by a numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidMatrix(_)
                | Error::PositivityViolation(_)
                | Error::CompatibilityViolation(_)
                | Error::NotSymplectic(_)
                | Error::AngleOutOfRange(_)
                | Error::ShapeMismatch(_)
                | Error::DimensionMismatch(_)
                | Error::NotMonotone(_)
                | Error::DomainError(_)
                | Error::Config(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
