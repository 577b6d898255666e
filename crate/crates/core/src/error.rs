use thiserror::Error;

/// Errors raised by the discretization, flows and integrators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("diffusion coefficients are not uniformly elliptic: smallest eigenvalue {min_eigenvalue:e} at {location:?}")]
    NonElliptic {
        min_eigenvalue: f64,
        location: Vec<f64>,
    },

    #[error("unsupported boundary condition: {0}")]
    UnsupportedBoundary(String),

    #[error("backward diffusion requested: step has negative real part {re:e}")]
    BackwardDiffusion { re: f64 },

    #[error("matrix exponential did not reach tolerance: residual estimate {residual:e} after {substeps} substeps")]
    AccuracyFailure { residual: f64, substeps: usize },

    #[error("source flow singular at node {node}: |1 + u(e^(Mt) - 1)| = {magnitude:e}")]
    SingularFlow { node: usize, magnitude: f64 },

    #[error("singular elliptic operator: pivot {pivot:e} at row {row}, condition estimate {condition:e}")]
    SingularOperator {
        row: usize,
        pivot: f64,
        condition: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = SplitError> = std::result::Result<T, E>;
