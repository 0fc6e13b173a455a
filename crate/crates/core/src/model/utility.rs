use serde::{Deserialize, Serialize};

use crate::error::MarginalRange;
use crate::{Error, ExtendedReal, Result};

/// Catalog of instantaneous utilities. Every member is continuous, concave
/// and increasing on `c >= 0` and smooth on `c > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilitySpec {
    /// `u(c) = c`
    Linear {},
    /// `u(c) = c + √c`
    SqrtShift {},
    /// `u(c) = (c^{1−θ} − 1)/(1 − θ)`, `log c` at `θ = 1`
    Crra { theta: f64 },
    /// `u(c) = a√c`
    ScaledSqrt { a: f64 },
}

fn check_c(c: f64, strict: bool) -> Result<()> {
    let ok = if strict { c > 0.0 } else { c >= 0.0 };
    if ok && c.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what: "c", value: c, domain: if strict { "(0, inf)" } else { "[0, inf)" } })
    }
}

impl UtilitySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            UtilitySpec::Crra { theta } if !(theta > 0.0 && theta.is_finite()) => {
                Err(Error::InvalidModel(format!("CRRA theta must be positive, got {theta}")))
            }
            UtilitySpec::ScaledSqrt { a } if !(a > 0.0 && a.is_finite()) => {
                Err(Error::InvalidModel(format!("ScaledSqrt a must be positive, got {a}")))
            }
            _ => Ok(()),
        }
    }

    /// `u(c)`; `-inf` at `c = 0` for CRRA with `θ >= 1`.
    pub fn eval(&self, c: f64) -> Result<ExtendedReal> {
        check_c(c, false)?;
        let v = match *self {
            UtilitySpec::Linear {} => c,
            UtilitySpec::SqrtShift {} => c + c.sqrt(),
            UtilitySpec::Crra { theta } => {
                if c == 0.0 && theta >= 1.0 {
                    return Ok(ExtendedReal::NegInf);
                }
                if theta == 1.0 {
                    c.ln()
                } else {
                    (c.powf(1.0 - theta) - 1.0) / (1.0 - theta)
                }
            }
            UtilitySpec::ScaledSqrt { a } => a * c.sqrt(),
        };
        ExtendedReal::from_f64(v)
    }

    /// `u'(c)` for `c > 0`.
    pub fn marginal(&self, c: f64) -> Result<f64> {
        check_c(c, true)?;
        Ok(match *self {
            UtilitySpec::Linear {} => 1.0,
            UtilitySpec::SqrtShift {} => 1.0 + 0.5 / c.sqrt(),
            UtilitySpec::Crra { theta } => c.powf(-theta),
            UtilitySpec::ScaledSqrt { a } => 0.5 * a / c.sqrt(),
        })
    }

    /// `u''(c)` for `c > 0`.
    pub fn curvature(&self, c: f64) -> Result<f64> {
        check_c(c, true)?;
        Ok(match *self {
            UtilitySpec::Linear {} => 0.0,
            UtilitySpec::SqrtShift {} => -0.25 * c.powf(-1.5),
            UtilitySpec::Crra { theta } => -theta * c.powf(-theta - 1.0),
            UtilitySpec::ScaledSqrt { a } => -0.25 * a * c.powf(-1.5),
        })
    }

    /// `u'(ℝ₊₊)`.
    pub fn marginal_range(&self) -> MarginalRange {
        match self {
            UtilitySpec::Linear {} => MarginalRange::point(1.0),
            UtilitySpec::SqrtShift {} => MarginalRange::open(1.0, f64::INFINITY),
            UtilitySpec::Crra { .. } | UtilitySpec::ScaledSqrt { .. } => MarginalRange::open(0.0, f64::INFINITY),
        }
    }

    /// Whether `u'` is strictly decreasing on `ℝ₊₊`.
    pub fn marginal_is_decreasing(&self) -> bool {
        !matches!(self, UtilitySpec::Linear {})
    }

    /// Infimum of the prices `p` at which `u(c) − pc` is bounded above on
    /// `c >= 0`; the conjugate is `+inf` strictly below it.
    pub fn conjugate_threshold(&self) -> f64 {
        match self {
            UtilitySpec::Linear {} | UtilitySpec::SqrtShift {} => 1.0,
            UtilitySpec::Crra { .. } | UtilitySpec::ScaledSqrt { .. } => 0.0,
        }
    }

    /// The `c` with `u'(c) = p`. Errors when `p` is outside the range of `u'`.
    pub fn marginal_inverse(&self, p: f64) -> Result<f64> {
        let range = self.marginal_range();
        if !p.is_finite() || !range.contains(p) || !self.marginal_is_decreasing() {
            return Err(Error::NotInvertible { p, range });
        }
        Ok(match *self {
            UtilitySpec::Linear {} => unreachable!("linear utility has a constant marginal"),
            UtilitySpec::SqrtShift {} => {
                let s = 0.5 / (p - 1.0);
                s * s
            }
            UtilitySpec::Crra { theta } => p.powf(-1.0 / theta),
            UtilitySpec::ScaledSqrt { a } => {
                let s = 0.5 * a / p;
                s * s
            }
        })
    }

    /// Concave conjugate `sup_{c>=0} {u(c) − pc}` for `p > 0`.
    pub fn conjugate(&self, p: f64) -> Result<ExtendedReal> {
        if !(p > 0.0) || p.is_nan() {
            return Err(Error::Domain { what: "p", value: p, domain: "(0, inf)" });
        }
        if p == f64::INFINITY {
            return self.eval(0.0);
        }
        let v = match *self {
            UtilitySpec::Linear {} => {
                if p < 1.0 {
                    return Ok(ExtendedReal::PosInf);
                }
                0.0
            }
            UtilitySpec::SqrtShift {} => {
                if p <= 1.0 {
                    return Ok(ExtendedReal::PosInf);
                }
                0.25 / (p - 1.0)
            }
            UtilitySpec::Crra { theta } => {
                let c = p.powf(-1.0 / theta);
                let u = if theta == 1.0 { c.ln() } else { (c.powf(1.0 - theta) - 1.0) / (1.0 - theta) };
                u - p * c
            }
            UtilitySpec::ScaledSqrt { a } => 0.25 * a * a / p,
        };
        ExtendedReal::from_f64(v)
    }
}
