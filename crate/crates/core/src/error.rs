use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("non-finite value {what} at frequency {k:?}")]
    NonFinite { what: String, k: [i64; 2] },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dz rho = {value:.6e} below h/2 = {bound:.6e} at x-node {node}, z-level {level}")]
    LowerBound {
        node: usize,
        level: usize,
        value: f64,
        bound: f64,
    },
    #[error("discriminant negative ({value:.3e}) at x-node {node}, frequency {k:?}")]
    Discriminant { node: usize, k: [i64; 2], value: f64 },
    #[error("symbol is not elliptic: min |a|/|xi|^m = {min_ratio:.3e}")]
    NotElliptic { min_ratio: f64 },
    #[error("parametrix series diverged at iteration {iteration} (residual {residual:.3e})")]
    Divergence { iteration: usize, residual: f64 },
    #[error("strip solve failed after {iterations} iterations: relative residual {residual:.3e}, condition estimate {condition:.3e}")]
    SolveFailed {
        iterations: usize,
        residual: f64,
        condition: f64,
    },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("time step {dt:.3e} exceeds the dispersive CFL limit {limit:.3e}")]
    Cfl { dt: f64, limit: f64 },
    #[error("run aborted at t = {t}: {reason}")]
    Aborted { t: f64, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
