use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("not a density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("quadrature did not converge: relative change {rel_change:e} after {nodes} nodes per panel")]
    QuadratureNotConverged { rel_change: f64, nodes: usize },

    #[error("tabulated T-matrix does not cover the Boltzmann support: {0}")]
    TableCoverage(String),

    #[error("dimension {dim} exceeds the dense limit {limit}; use time stepping instead")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("Brownian limit violated: alpha = m/M = {alpha} (> 0.5); pass an explicit override to proceed")]
    BrownianLimit { alpha: f64 },

    #[error("no stationary state: {0}")]
    NoStationaryState(String),

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and strictly positive, got {value}"),
        })
    }
}

pub(crate) fn non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and non-negative, got {value}"),
        })
    }
}
