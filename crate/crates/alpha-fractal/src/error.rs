use thiserror::Error;

/// Errors produced by construction, evaluation and iteration routines.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum FractalError {
    #[error("knots must be strictly increasing (violation at index {index})")]
    NonMonotoneKnots { index: usize },

    #[error("a partition needs at least 3 knots, got {count}")]
    TooFewKnots { count: usize },

    #[error("x = {x} lies outside the map image [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },

    #[error("x = {x} lies outside the grid domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("finite-difference order {order} exceeds the supported maximum {max}")]
    OrderTooHigh { order: usize, max: usize },

    #[error("derivative order {k} is not supported by the norm evaluator (max {max})")]
    UnsupportedOrder { k: usize, max: usize },

    #[error("problem specification is invalid: {reason}")]
    SpecInvalid { reason: String },

    #[error("operator is not contractive in the requested space (factor = {factor})")]
    NotContractive { factor: f64 },

    #[error("iteration did not converge within {iterations} steps (residual = {residual})")]
    MaxIterExceeded { iterations: usize, residual: f64 },

    #[error("scaling kind is incompatible with the {space} space (constant scaling required)")]
    IncompatibleScalingKind { space: String },

    #[error("hypothesis violated: {reason}")]
    HypothesisViolated { reason: String },

    #[error("series did not converge within {terms} terms (last term norm = {residual})")]
    MaxTermsExceeded { terms: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, FractalError>;
