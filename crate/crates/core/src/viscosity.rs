//! Pointwise viscosity tests for concave candidates.
//!
//! The problem is a maximization, so the inequalities run opposite to the
//! usual convention: a smooth test function touching `V` from below gives the
//! subsolution inequality `H(k, φ'(k)) <= ρV(k)`, one touching from above gives
//! the supersolution inequality `H(k, φ'(k)) >= ρV(k)`. For a concave `V` the
//! slopes of test functions from above fill `[D₊V(k), D₋V(k)]`; from below
//! there are none at a kink.
//!
//! A grid check can only refute. Clean reports say "no violation found on
//! grid".

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::candidates::CandidateValueFn;
use crate::hamiltonian::hamiltonian;
use crate::model::ModelSpec;
use crate::numeric::{golden_section_min, max_chord_violation, richardson_derivative, validate_grid};
use crate::{Error, ExtendedReal, Result};

pub const DEFAULT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SubStatus {
    Holds,
    /// `H(k, V'(k)) − ρV(k) > tol`, possibly `+inf`.
    Violated {
        gap: ExtendedReal,
    },
    /// Concave kink: no smooth function touches from below.
    Vacuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SuperStatus {
    Holds,
    /// `ρV(k) − min_{p ∈ [D₊, D₋]} H(k, p) > tol`, attained at `worst_p`.
    Violated {
        gap: f64,
        worst_p: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViscosityVerdict {
    pub k: f64,
    pub sub: SubStatus,
    #[serde(rename = "super")]
    pub sup: SuperStatus,
    pub d_plus: f64,
    pub d_minus: f64,
}

impl ViscosityVerdict {
    pub fn violated(&self) -> bool {
        matches!(self.sub, SubStatus::Violated { .. }) || matches!(self.sup, SuperStatus::Violated { .. })
    }
}

/// Stencil half-widths `t0·2^{-j}` used for the local concavity test.
const STENCIL_LEVELS: i32 = 6;

fn local_concavity(candidate: &CandidateValueFn, k: f64) -> Result<()> {
    let (lo, hi) = candidate.domain();
    let t0 = 1e-2 * k;
    let vk = candidate.eval(k)?;
    let tol = 1e-10 * vk.abs().max(1.0);
    for j in 0..STENCIL_LEVELS {
        let t = t0 * 0.5f64.powi(j);
        if k - t <= lo.max(0.0) || k + t > hi {
            continue;
        }
        let chord = 0.5 * (candidate.eval(k - t)? + candidate.eval(k + t)?);
        if chord - vk > tol {
            return Err(Error::NotConcaveHere { k });
        }
    }
    Ok(())
}

/// `(D₊V(k), D₋V(k))` from the candidate's exact one-sided slopes, after a
/// chord test on shrinking symmetric stencils around `k`.
pub fn one_sided_derivatives(candidate: &CandidateValueFn, k: f64) -> Result<(f64, f64)> {
    local_concavity(candidate, k)?;
    let (d_plus, d_minus) = candidate.one_sided(k)?;
    if d_plus > d_minus + 1e-12 * d_minus.abs().max(1.0) {
        return Err(Error::NotConcaveHere { k });
    }
    Ok((d_plus, d_minus))
}

/// Difference-quotient route to `(D₊, D₋)` with Richardson extrapolation, for
/// cross-checking the analytic slopes.
pub fn one_sided_derivatives_numeric(candidate: &CandidateValueFn, k: f64) -> Result<(f64, f64)> {
    local_concavity(candidate, k)?;
    let g = |x: f64| candidate.eval(x);
    let h0 = 1e-3 * k;
    let d_plus = richardson_derivative(g, k, h0, 1.0)?;
    let d_minus = richardson_derivative(g, k, h0, -1.0)?;
    if d_plus > d_minus + 1e-6 * d_minus.abs().max(1.0) {
        return Err(Error::NotConcaveHere { k });
    }
    Ok((d_plus, d_minus))
}

fn rho_v(model: &ModelSpec, candidate: &CandidateValueFn, k: f64) -> Result<f64> {
    Ok(model.rho * candidate.eval(k)?)
}

fn sub_status(model: &ModelSpec, candidate: &CandidateValueFn, k: f64, d: (f64, f64), tol: f64) -> Result<SubStatus> {
    let (d_plus, d_minus) = d;
    if d_plus < d_minus {
        return Ok(SubStatus::Vacuous);
    }
    let gap = hamiltonian(model, k, d_plus)?.checked_sub(ExtendedReal::from_f64(rho_v(model, candidate, k)?)?)?;
    Ok(if gap > ExtendedReal::Finite(tol) { SubStatus::Violated { gap } } else { SubStatus::Holds })
}

/// Minimum of the convex map `p ↦ H(k, p)` over `[a, b]`: golden section with
/// both endpoints compared.
pub fn min_hamiltonian_on(model: &ModelSpec, k: f64, a: f64, b: f64) -> Result<(f64, ExtendedReal)> {
    hamiltonian(model, k, a)?;
    if a == b {
        return Ok((a, hamiltonian(model, k, a)?));
    }
    let h = |p: f64| hamiltonian(model, k, p).unwrap_or(ExtendedReal::PosInf);
    Ok(golden_section_min(h, a, b, 200))
}

fn super_status(
    model: &ModelSpec,
    candidate: &CandidateValueFn,
    k: f64,
    d: (f64, f64),
    tol: f64,
) -> Result<SuperStatus> {
    let (worst_p, h_min) = min_hamiltonian_on(model, k, d.0, d.1)?;
    let gap = ExtendedReal::from_f64(rho_v(model, candidate, k)?)?.checked_sub(h_min)?;
    Ok(match gap {
        ExtendedReal::Finite(g) if g > tol => SuperStatus::Violated { gap: g, worst_p },
        ExtendedReal::PosInf => SuperStatus::Violated { gap: f64::INFINITY, worst_p },
        _ => SuperStatus::Holds,
    })
}

/// Subsolution test at `k`: `Vacuous` at a concave kink, otherwise
/// `H(k, V'(k)) <= ρV(k) + tol`.
pub fn check_subsolution_at(model: &ModelSpec, candidate: &CandidateValueFn, k: f64, tol: f64) -> Result<SubStatus> {
    let d = one_sided_derivatives(candidate, k)?;
    sub_status(model, candidate, k, d, tol)
}

/// Supersolution test at `k`: `min_{p ∈ [D₊, D₋]} H(k, p) >= ρV(k) − tol`.
pub fn check_supersolution_at(
    model: &ModelSpec,
    candidate: &CandidateValueFn,
    k: f64,
    tol: f64,
) -> Result<SuperStatus> {
    let d = one_sided_derivatives(candidate, k)?;
    super_status(model, candidate, k, d, tol)
}

pub fn verdict_at(model: &ModelSpec, candidate: &CandidateValueFn, k: f64, tol: f64) -> Result<ViscosityVerdict> {
    let d = one_sided_derivatives(candidate, k)?;
    Ok(ViscosityVerdict {
        k,
        sub: sub_status(model, candidate, k, d, tol)?,
        sup: super_status(model, candidate, k, d, tol)?,
        d_plus: d.0,
        d_minus: d.1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViscosityReport {
    pub tol: f64,
    pub verdicts: Vec<ViscosityVerdict>,
    pub sub_violations: usize,
    pub super_violations: usize,
    pub vacuous: usize,
    /// No violation at any grid point. This never certifies a viscosity
    /// solution.
    pub consistent: bool,
    pub summary: String,
}

impl ViscosityReport {
    pub fn violations(&self) -> impl Iterator<Item = &ViscosityVerdict> {
        self.verdicts.iter().filter(|v| v.violated())
    }

    /// Columns `k, d_plus, d_minus, sub_status, super_status, gap, worst_p`.
    /// `gap` is the violated side's gap; `worst_p` is filled for
    /// supersolution violations only.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "d_plus", "d_minus", "sub_status", "super_status", "gap", "worst_p"])?;
        for v in &self.verdicts {
            let sub = match v.sub {
                SubStatus::Holds => "holds",
                SubStatus::Violated { .. } => "violated",
                SubStatus::Vacuous => "vacuous",
            };
            let (sup, gap, worst_p) = match (v.sub, v.sup) {
                (_, SuperStatus::Violated { gap, worst_p }) => (
                    "violated",
                    ExtendedReal::from_f64(gap).map(|g| g.to_string()).unwrap_or_default(),
                    worst_p.to_string(),
                ),
                (SubStatus::Violated { gap }, SuperStatus::Holds) => ("holds", gap.to_string(), String::new()),
                _ => ("holds", String::new(), String::new()),
            };
            w.write_record([
                v.k.to_string(),
                v.d_plus.to_string(),
                v.d_minus.to_string(),
                sub.into(),
                sup.into(),
                gap,
                worst_p,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Verdicts at every grid point. The candidate must pass a chord test on the
/// grid (within `1e-9` of its scale) and locally at each point.
pub fn viscosity_report(
    model: &ModelSpec,
    candidate: &CandidateValueFn,
    grid: &[f64],
    tol: f64,
) -> Result<ViscosityReport> {
    validate_grid(grid)?;
    let values = grid.iter().map(|&k| candidate.eval(k)).collect::<Result<Vec<_>>>()?;
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let (viol, at) = max_chord_violation(grid, &values);
    if viol > 1e-9 * scale {
        return Err(Error::NotConcaveHere { k: grid[at] });
    }
    let verdicts = grid.par_iter().map(|&k| verdict_at(model, candidate, k, tol)).collect::<Result<Vec<_>>>()?;
    let sub_violations = verdicts.iter().filter(|v| matches!(v.sub, SubStatus::Violated { .. })).count();
    let super_violations = verdicts.iter().filter(|v| matches!(v.sup, SuperStatus::Violated { .. })).count();
    let vacuous = verdicts.iter().filter(|v| v.sub == SubStatus::Vacuous).count();
    let consistent = sub_violations + super_violations == 0;
    let summary = if consistent {
        format!("no violation found on grid ({} points)", grid.len())
    } else {
        format!("{sub_violations} subsolution and {super_violations} supersolution violations on {} points", grid.len())
    };
    Ok(ViscosityReport { tol, verdicts, sub_violations, super_violations, vacuous, consistent, summary })
}
