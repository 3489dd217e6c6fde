//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by mesh construction, constitutive evaluation, assembly,
/// solvers and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("degenerate triangle {index}: signed area {area:.3e}")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("material error: {0}")]
    Material(String),

    #[error("damage value {value} outside [0,1] beyond tolerance")]
    DamageOutOfRange { value: f64 },

    #[error("no damage drive in this mode: modulus derivative is zero")]
    NoDamageDrive,

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("unknown boundary tag `{0}`")]
    UnknownTag(String),

    #[error("linear solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    LinearSolve { residual: f64, iterations: usize },

    #[error("QP solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    QpSolve { residual: f64, iterations: usize },

    #[error("inner iteration limit {limit} exceeded, last residual {residual:.3e}")]
    InnerIterations { limit: usize, residual: f64 },

    #[error("scheme error: {0}")]
    Scheme(String),

    #[error("plasticity error: {0}")]
    Plasticity(String),

    #[error("parameter tuning violated: {0}")]
    Tuning(String),

    #[error("configuration errors:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("energy log error: {0}")]
    EnergyLog(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
