use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ShellError {
    #[error("normal is not unit length (|n| = {norm})")]
    NonUnitNormal { norm: f64 },

    #[error("coupling has zero sign scalar, its inverse is undefined")]
    DegenerateCoupling,

    #[error("{0} coupling is nonlocal and has no pointwise matrix")]
    NonLocal(&'static str),

    #[error("{0} coupling has no such transform")]
    NoTransform(&'static str),

    #[error("z = {z} lies on the cut (-inf,-m] u [m,inf) for m = {mass}")]
    BranchCut { z: Complex64, mass: f64 },

    #[error("mass must be positive and finite, got {0}")]
    InvalidMass(f64),

    #[error("kernel evaluated at coincident points")]
    CoincidentPoints,

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("mesh {path}: {reason}")]
    Mesh { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("offset distance must be positive, got {0}")]
    NonPositiveOffset(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("critical coupling refused: {0}")]
    CriticalCoupling(String),

    #[error("numerically singular: {0}")]
    Singular(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, ShellError>;
