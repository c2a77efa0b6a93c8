// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("root {k} undefined: {reason}")]
    UndefinedRoot { k: usize, reason: String },

    #[error("root {0} is not real")]
    NonRealRoot(usize),

    #[error("drift matrix is unstable (max Re = {max_re:e})")]
    Unstable { max_re: f64 },

    #[error("ill-conditioned solve: {0}")]
    Conditioning(String),

    #[error("unphysical covariance: smallest symplectic eigenvalue {0:e} < 1/2")]
    Unphysical(f64),

    #[error("numerical domain error: {0}")]
    Numerical(String),

    #[error("oracle did not converge: {0}")]
    OracleTimeout(String),

    #[error("iteration did not converge after {iterations} steps (last change {last_change:e})")]
    NonConvergence { iterations: usize, last_change: f64 },

    #[error("no sign change in bracket [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("grid too coarse: {0}")]
    Resolution(String),

    #[error("singular resolvent at omega = {0:e}")]
    Singular(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("{inner} (at {at})")]
    Located { at: String, inner: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// Attaches the grid point or cell where the error arose.
    pub fn at(self, at: impl Into<String>) -> Self {
        Error::Located {
            at: at.into(),
            inner: Box::new(self),
        }
    }

    /// The location attached by [`Error::at`], if any.
    pub fn location(&self) -> Option<&str> {
        match self {
            Error::Located { at, .. } => Some(at),
            _ => None,
        }
    }

    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Located { inner, .. } => inner.is_config(),
            e => matches!(e, Error::InvalidParam { .. } | Error::Config(_)),
        }
    }
}
