//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by operator construction, scheme assembly and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// Expression could not be parsed; positions are 1-based.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Operator definition is internally inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Dimensions of a coefficient field do not match the operator.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Diagonal-dominance admissibility failed; the scheme would not be monotone.
    #[error("scheme not admissible: diagonal dominance violated at node {node:?} for control pair (alpha={alpha}, beta={beta}): a[{axis}][{axis}] = {diag:.6e} < cross sum {cross:.6e}")]
    Admissibility {
        node: Vec<f64>,
        alpha: usize,
        beta: usize,
        axis: usize,
        diag: f64,
        cross: f64,
    },

    /// A solver produced a non-finite value.
    #[error("divergence: non-finite value at step {step} (t = {time:.6e})")]
    Divergence { step: usize, time: f64 },

    /// Fixed-point iteration exhausted its budget.
    #[error("discounted solve did not converge within {iterations} iterations (delta = {delta:.3e}); residual tail: {tail:?}")]
    NonConvergence {
        delta: f64,
        iterations: usize,
        tail: Vec<f64>,
    },

    /// Long-time slope spread too large to extract an ergodic constant.
    #[error("long-time estimate inconclusive: slope spread {spread:.3e} exceeds threshold {threshold:.3e}; increase the horizon")]
    Inconclusive { spread: f64, threshold: f64 },

    /// Time step fell below the configured floor.
    #[error("CFL step {dt:.3e} below floor {floor:.3e}; refine epsilon/grid trade-off ({hint})")]
    CflFloor { dt: f64, floor: f64, hint: String },

    /// Uniform ellipticity required but not satisfied on samples.
    #[error("ellipticity violated: min eigenvalue {min_eig:.6e} < nu = {nu:.6e} at {witness}")]
    Ellipticity {
        min_eig: f64,
        nu: f64,
        witness: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
