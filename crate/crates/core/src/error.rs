//! Error types shared across the solver modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("momentum grid mismatch: {0}")]
    GridMismatch(String),

    #[error("singular input: {0}")]
    SingularInput(String),

    #[error("degenerate transfer angle (sin(alpha L) ~ 0) at s = {re}+{im}i")]
    DegenerateAngle { re: f64, im: f64 },

    #[error("non-finite kernel evaluation on the inversion contour at s = {re}+{im}i")]
    ContourCollision { re: f64, im: f64 },

    #[error("marginal regime 4*gamma ~ omega ({0}); use a numerical inversion instead")]
    MarginalRegime(f64),

    #[error("quadrature failed to converge: {0}")]
    QuadratureFailure(String),

    #[error("integrator step-size failure near t = {0}")]
    StepSizeFailure(f64),

    #[error("matrix structure violation: {0}")]
    StructureViolation(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("not enough data points: need {need}, got {got}")]
    TooFewPoints { need: usize, got: usize },

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("numerical failure in mode n={mode}: {message}")]
    ModeFailure { mode: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
