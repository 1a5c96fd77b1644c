use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("resolution {got} too small: need at least {min} nodes per axis")]
    Resolution { got: usize, min: usize },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("coefficient bound violated at node {node}: {detail}")]
    Ellipticity { node: usize, detail: String },

    #[error("M-matrix structure violated at row {row}: {detail}")]
    MMatrix { row: usize, detail: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("singular matrix: zero pivot at row {row}")]
    Singular { row: usize },

    #[error("{method} did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// The nonlinearity overflowed; iteration drivers read this as blow-up.
    #[error("nonlinearity saturated: {0}")]
    Saturation(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("eigenfield is not positive: {0}")]
    NotPositive(String),

    #[error("no convergent parameter found above {floor:e}")]
    NoConvergentLambda { floor: f64 },

    #[error("inconsistent verdicts: {0}")]
    InconsistentVerdicts(String),

    #[error("bracket inconsistency: {0}")]
    BracketInconsistency(String),

    #[error("lower envelope fit failed: {0}")]
    EnvelopeFit(String),

    #[error("no finite constant: {0}")]
    NoFiniteConstant(String),
}

pub type Result<T> = std::result::Result<T, Error>;
