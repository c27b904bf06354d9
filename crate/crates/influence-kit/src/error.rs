//! Crate-wide error type.

use ndarray::Array1;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file; `line` is 1-based and counts physical lines.
    #[error("parse error in {path}, line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid {what}: {message}")]
    InvalidValue { what: &'static str, message: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("label {label} out of range for {k} classes")]
    LabelOutOfRange { label: i64, k: usize },

    /// Operation deliberately not defined for a family. The hinge loss in
    /// particular has no gradient at its kink; callers are pointed at the
    /// smooth surrogate instead of being handed a silent zero.
    #[error("{family} does not support {op}: {hint}")]
    Unsupported {
        family: &'static str,
        op: &'static str,
        hint: &'static str,
    },

    #[error(
        "matrix is not positive definite (Cholesky failed at pivot {pivot}); \
         increase the damping term"
    )]
    NotPositiveDefinite { pivot: usize },

    #[error(
        "negative curvature encountered in CG at iteration {iteration}; \
         the system is not positive definite — increase the damping term"
    )]
    NegativeCurvature { iteration: usize },

    #[error(
        "stochastic iHVP recursion diverged (repeat {repeat}, step {step}, \
         iterate norm {iterate_norm:.3e}, scale {scale:.3e}); increase `scale` \
         so the scaled Hessian stays well below the identity"
    )]
    LissaDiverged {
        repeat: usize,
        step: usize,
        iterate_norm: f64,
        scale: f64,
    },

    /// Training ran out of iterations. Carries the last iterate so callers
    /// can inspect or resume from it.
    #[error(
        "training did not converge within {iterations} iterations \
         (gradient norm {grad_norm:.3e}, tolerance {tol_grad:.3e})"
    )]
    DidNotConverge {
        iterations: usize,
        grad_norm: f64,
        tol_grad: f64,
        last_iterate: Box<Array1<f64>>,
    },

    #[error("line search failed to find a descent step at iteration {iteration}")]
    LineSearchFailed { iteration: usize },

    #[error("correlation is undefined for constant input")]
    ConstantInput,

    #[error("non-finite value encountered in {what}")]
    NonFinite { what: String },

    #[error("model file {path}: {message}")]
    Schema { path: String, message: String },

    #[error(
        "problem too large for explicit factorization (p = {p}, limit {limit}); \
         use the cg or lissa backend"
    )]
    TooLarge { p: usize, limit: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(what: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidValue {
            what,
            message: message.into(),
        }
    }
}
