use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid operator parameters: {0}")]
    InvalidParams(String),

    #[error("gradient is zero; use eval_f_at_zero for the semicontinuous envelopes")]
    ZeroGradient,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (|a_ij - a_ji| = {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("unknown axiom `{0}`")]
    UnknownAxiom(String),

    #[error("derivatives requested at the barrier center")]
    AtCenter,

    #[error("point lies outside the ball of radius {radius}")]
    OutsideBall { radius: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("grid spacing {h} too coarse for inradius {inradius} (need h < inradius/4)")]
    GridTooCoarse { h: f64, inradius: f64 },

    #[error("node {0:?} is not an interior node")]
    NotInterior((usize, usize)),

    #[error("right-hand side must be positive in the interior (min {0})")]
    NonPositiveSource(f64),

    #[error("solver did not converge after {iterations} Newton steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} steps (last change {change:e})")]
    EigenNoConvergence { iterations: usize, change: f64 },

    #[error("negative field value {value} at node {node:?}")]
    NegativeValue { node: (usize, usize), value: f64 },

    #[error("comparison precondition fails at {} boundary node(s)", .0.len())]
    ComparisonPrecondition(Vec<(usize, usize)>),

    #[error("degenerate point cloud: {0}")]
    DegenerateCloud(String),

    #[error("transformed field has the wrong kind (expected {expected})")]
    WrongKind { expected: &'static str },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
