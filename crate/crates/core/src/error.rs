use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Range of a marginal utility on the positive reals, carried by
/// [`Error::NotInvertible`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalRange {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl MarginalRange {
    pub fn open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: false, hi_closed: false }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x, lo_closed: true, hi_closed: true }
    }

    pub fn contains(&self, p: f64) -> bool {
        let above = if self.lo_closed { p >= self.lo } else { p > self.lo };
        let below = if self.hi_closed { p <= self.hi } else { p < self.hi };
        above && below
    }

    /// True when the range is all of (0, ∞).
    pub fn is_positive_reals(&self) -> bool {
        self.lo == 0.0 && !self.lo_closed && self.hi == f64::INFINITY
    }
}

impl fmt::Display for MarginalRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == self.hi {
            return write!(f, "{{{}}}", self.lo);
        }
        let open = if self.lo_closed { '[' } else { '(' };
        let close = if self.hi_closed { ']' } else { ')' };
        let hi = if self.hi.is_infinite() { "inf".to_string() } else { self.hi.to_string() };
        write!(f, "{open}{}, {hi}{close}", self.lo)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} is outside the domain {domain}")]
    Domain { what: &'static str, value: f64, domain: &'static str },

    #[error("u' is not invertible at p = {p}: the range of u' is {range}")]
    NotInvertible { p: f64, range: MarginalRange },

    #[error("invalid extended-real arithmetic: {0}")]
    Arithmetic(&'static str),

    #[error("steady state is not isolated: rho lies in the subdifferential throughout [{lo}, {hi}]")]
    NotIsolated { lo: f64, hi: f64 },

    #[error("condition {condition} failed: {detail}")]
    ConditionFailed { condition: String, detail: String },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("k = {k} is outside the candidate domain [{lo}, {hi}]")]
    OutOfDomain { k: f64, lo: f64, hi: f64 },

    #[error("derivative requested at a kink k = {k}; use one-sided derivatives")]
    KinkDerivative { k: f64 },

    #[error("HJB solve failed after k = {last_good_k}: {reason}")]
    SolveFailed { last_good_k: f64, reason: String },

    #[error("candidate is not concave near k = {k}")]
    NotConcaveHere { k: f64 },

    #[error("feedback policy undefined at k = {k}: no unique maximizer for p = {p}")]
    PolicyUndefined { k: f64, p: f64 },

    #[error("payoff is -inf (u(c) = -inf at t = {t})")]
    MinusInfinitePayoff { t: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid candidate descriptor `{desc}`: {message}")]
    Descriptor { desc: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
