//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by channel construction, fidelity evaluation, and
/// recovery synthesis. The short kebab-case prefix of each message is a
/// stable code that the CLI maps to exit statuses.
#[derive(Debug, Error)]
pub enum AqecError {
    #[error("bad-dims: {0}")]
    BadDims(String),

    #[error("bad-tensor-dims: {0}")]
    BadTensorDims(String),

    #[error("not-psd: eigenvalue {0} below tolerance")]
    NotPsd(f64),

    #[error("bad-param: {0}")]
    BadParam(String),

    #[error("not-trace-preserving: residual {0}")]
    NotTracePreserving(f64),

    #[error("bad-lambda: coefficient matrix not PSD (min eigenvalue {0})")]
    BadLambda(f64),

    #[error("not-idempotent: channel differs from its square by {0}")]
    NotIdempotent(f64),

    #[error("numeric-psd-failure: {0}")]
    NumericPsdFailure(String),

    #[error("saddle-inconsistent: trace norm {trace_norm} vs dual fidelity {fidelity}")]
    SaddleInconsistent { trace_norm: f64, fidelity: f64 },

    #[error("bad-completion: defect operator not PSD (min eigenvalue {0})")]
    BadCompletion(f64),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, AqecError>;
