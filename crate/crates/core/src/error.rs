use thiserror::Error;

/// Errors raised across construction, certification, control and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("constraint intersection is empty")]
    EmptySet,

    #[error("{r} half-spaces exceeds the subset enumeration cap of {cap}")]
    TooManyHalfspaces { r: usize, cap: usize },

    #[error("no interior witness for index set {set:?} (best margin {margin:e})")]
    AssumptionViolated { set: Vec<usize>, margin: f64 },

    #[error("positions allowed by term {term} are unbounded")]
    UnboundedPositions { term: usize },

    #[error("gamma * delta = {product} must exceed epsilon = {epsilon}")]
    ParameterViolation { product: f64, epsilon: f64 },

    #[error("position is outside the safety set (h = {value:e})")]
    NotInC { value: f64 },

    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("input matrix is not right invertible (residual {residual:e})")]
    NotRightInvertible { residual: f64 },

    #[error("cost matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("quadratic program is infeasible")]
    Infeasible,

    #[error("state is too far outside the safe set (B = {value:e}, allowed margin {margin})")]
    OutsideNeighborhood { value: f64, margin: f64 },

    #[error("plant does not provide a potential/velocity drift split")]
    NoSplit,

    #[error("input bound d = {d} does not exceed k_G * k_1 = {required}")]
    InsufficientActuation { d: f64, required: f64 },

    #[error("inertia matrix is singular at theta = {theta:?}")]
    SingularInertia { theta: [f64; 2] },

    #[error("safeguarding QP infeasible at t = {t} (x = {x:?})")]
    QpInfeasibleAt { t: f64, x: Vec<f64> },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("safety condition fails on sampled boundary (worst margin {worst_margin:e})")]
    ConditionFailed { worst_margin: f64 },

    #[error("{0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Validation(format!("malformed document: {e}"))
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
