use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported polynomial degree {0} (expected 1..=16)")]
    UnsupportedDegree(usize),
    #[error("Newton iteration for quadrature nodes did not converge (degree {degree})")]
    NonConvergence { degree: usize },
    #[error("reference coordinate {0} outside [-1, 1]")]
    OutOfReferenceDomain(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid Lame parameters (lambda = {lambda}, mu = {mu})")]
    InvalidLame { lambda: f64, mu: f64 },
    #[error("stiffness matrix is not symmetric positive definite")]
    NotSpd,
    #[error("operation requires an isotropic material")]
    AnisotropicUnsupported,
    #[error("invalid extent: {0}")]
    InvalidExtent(String),
    #[error("reflection coefficient {0} outside [-1, 1]")]
    InvalidReflectionCoefficient(f64),
    #[error("point ({x}, {y}, {z}) outside the domain")]
    PointOutsideDomain { x: f64, y: f64, z: f64 },
    #[error("PML tolerance {0} outside (0, 1)")]
    InvalidTol(f64),
    #[error("numerical divergence detected at t = {time}")]
    DivergenceDetected { time: f64 },
    #[error("source time function derivative order {0} not supported")]
    UnsupportedOrder(usize),
    #[error("reference domain too small: {0}")]
    GeometryInsufficient(String),
    #[error("convergence rate undefined: zero or non-positive error")]
    DegenerateError,
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
