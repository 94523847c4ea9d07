use thiserror::Error;

/// Errors raised by the grid, operator, solver and cascade layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("out of domain: {0}")]
    OutOfDomain(String),

    #[error("empty field: {0}")]
    EmptyField(String),

    #[error("empty mask: ball around {center:?} with radius {radius} holds no nodes")]
    EmptyMask { center: [f64; 4], radius: f64 },

    #[error("insufficient interior: {0}")]
    InsufficientInterior(String),

    #[error("singular coefficient matrix at node {node}")]
    SingularCoefficient { node: usize },

    #[error("degenerate averaging path at node {node}, t = {t}: min eigenvalue {min_eig}")]
    DegeneratePath { node: usize, t: f64, min_eig: f64 },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("ellipticity lost: clamping active at {clamped} of {nodes} nodes for 3 consecutive steps")]
    Degeneracy { clamped: usize, nodes: usize },

    #[error("cascade aborted at level {level} after {completed} completed levels: {reason}")]
    CascadeAborted {
        level: usize,
        completed: usize,
        reason: String,
    },

    #[error("fit impossible: {0}")]
    FitImpossible(String),

    #[error("depth exhausted: pair needs level {needed}, largest usable level is {available}")]
    DepthExhausted { needed: usize, available: usize },

    #[error("invalid comparison pair: {0}")]
    InvalidPair(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("near singular set: {0}")]
    NearSingularity(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
