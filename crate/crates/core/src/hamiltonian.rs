//! The HJB left-hand side `H(k, p) = sup_{c≥0} {(f(k) − c)p + u(c)} = f(k)p + u*(p)`
//! as an extended real, its maximizing control, and HJB residuals of candidates.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::candidates::CandidateValueFn;
use crate::model::ModelSpec;
use crate::numeric::validate_grid;
use crate::{Error, ExtendedReal, Result};

fn check_k(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what: "k", value: k, domain: "(0, inf)" })
    }
}

/// `H(k, p)`. For `p <= 0` the supremum over consumption diverges and the
/// result is `+inf`, as it is whenever the conjugate diverges.
pub fn hamiltonian(model: &ModelSpec, k: f64, p: f64) -> Result<ExtendedReal> {
    check_k(k)?;
    if p.is_nan() {
        return Err(Error::Domain { what: "p", value: p, domain: "the reals" });
    }
    if p <= 0.0 {
        return Ok(ExtendedReal::PosInf);
    }
    let production = model.production.eval(k)?;
    ExtendedReal::from_f64(production * p)?.checked_add(model.utility.conjugate(p)?)
}

/// Maximizer of `(f(k) − c)p + u(c)` over `c >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Control {
    Optimal(f64),
    /// Supremum not attained, or attained on more than one point.
    Degenerate,
}

/// `(u')⁻¹(p)` when `p` is in the range of a decreasing `u'`, the corner `0`
/// when `p` exceeds `sup u'`, and [`Control::Degenerate`] otherwise (e.g. linear
/// utility with `p <= 1`).
pub fn optimal_control(model: &ModelSpec, k: f64, p: f64) -> Result<Control> {
    check_k(k)?;
    if !(p > 0.0) || !p.is_finite() {
        return Ok(Control::Degenerate);
    }
    let u = &model.utility;
    let range = u.marginal_range();
    if u.marginal_is_decreasing() && range.contains(p) {
        return Ok(Control::Optimal(u.marginal_inverse(p)?));
    }
    if p > range.hi {
        return Ok(Control::Optimal(0.0));
    }
    Ok(Control::Degenerate)
}

/// `H(k, V'(k)) − ρV(k)` using the candidate's own derivative.
pub fn hjb_residual(model: &ModelSpec, candidate: &CandidateValueFn, k: f64) -> Result<ExtendedReal> {
    let v = candidate.eval(k)?;
    let p = candidate.deriv(k)?;
    hamiltonian(model, k, p)?.checked_sub(ExtendedReal::from_f64(model.rho * v)?)
}

/// Pointwise residuals on a grid with summary norms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualProfile {
    pub grid: Vec<f64>,
    pub residual: Vec<ExtendedReal>,
    pub values: Vec<f64>,
    pub derivatives: Vec<f64>,
    /// Max `|residual|` over finite entries.
    pub sup_norm_finite: f64,
    pub count_infinite: usize,
}

impl ResidualProfile {
    /// Columns `k, residual, V, Vprime`; infinite residuals as `+inf`/`-inf`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "residual", "V", "Vprime"])?;
        for i in 0..self.grid.len() {
            w.write_record([
                self.grid[i].to_string(),
                self.residual[i].to_string(),
                self.values[i].to_string(),
                self.derivatives[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn residual_profile(model: &ModelSpec, candidate: &CandidateValueFn, grid: &[f64]) -> Result<ResidualProfile> {
    validate_grid(grid)?;
    let rows: Vec<(ExtendedReal, f64, f64)> = grid
        .par_iter()
        .map(|&k| {
            let r = hjb_residual(model, candidate, k)?;
            Ok((r, candidate.eval(k)?, candidate.deriv(k)?))
        })
        .collect::<Result<_>>()?;
    let residual: Vec<ExtendedReal> = rows.iter().map(|r| r.0).collect();
    let sup_norm_finite = residual.iter().filter_map(|r| r.finite()).fold(0.0f64, |m, r| m.max(r.abs()));
    let count_infinite = residual.iter().filter(|r| !r.is_finite()).count();
    Ok(ResidualProfile {
        grid: grid.to_vec(),
        values: rows.iter().map(|r| r.1).collect(),
        derivatives: rows.iter().map(|r| r.2).collect(),
        residual,
        sup_norm_finite,
        count_infinite,
    })
}
