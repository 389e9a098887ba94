use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("derivative order {0} unsupported (must be between 1 and {max})", max = crate::MAX_DERIVATIVE_ORDER)]
    UnsupportedDerivativeOrder(usize),

    #[error("operator word of length {0} exceeds engine depth {max}", max = crate::operators::MAX_WORD_LEN)]
    WordTooLong(usize),

    #[error("unsupported correction order {0}")]
    UnsupportedOrder(usize),

    #[error("timestep must be positive and finite (got {0})")]
    InvalidTimestep(f64),

    #[error("invalid mass matrix: {0}")]
    InvalidMass(String),

    #[error("mass matrix is not positive definite")]
    DegenerateMass,

    #[error("step is resonant: omega*tau = {0} is too close to an odd multiple of pi")]
    ResonantStep(f64),

    #[error("potential has no quadratic stiffness matrix; exact quadratic stepping unavailable")]
    NotQuadratic,

    #[error("newton iteration diverged after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("too few zero crossings to estimate a period (found {0})")]
    TooFewCrossings(usize),

    #[error("reference solution did not converge under step halving (last difference {0:e})")]
    RefinementFailed(f64),

    #[error("error {0:e} is too small to measure a convergence order")]
    OrderUnmeasurable(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Strips any `StepFailed` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::StepFailed { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
