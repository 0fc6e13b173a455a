//! Candidate value functions: the closed-form HJB solution families, grid
//! functions produced by integrating the HJB equation from the steady state,
//! and pointwise minima used to build concave kinks.

mod descriptor;
mod grid;
mod hjb_solve;

use serde::Serialize;

pub use descriptor::parse_candidate;
pub use grid::{GridFn, Interp};
pub use hjb_solve::{solve_hjb_from_steady_state, HjbSolution, SolveOptions, SolveStrategy};

use crate::numeric::{bisect, logspace, max_chord_violation};
use crate::{Error, Result};

/// An evaluable candidate `V` with derivative access.
#[derive(Debug, Clone, PartialEq)]
pub enum CandidateValueFn {
    /// `V(k) = A·e^{2ρ√k − 2ρ}`, classical solution of the linear-utility,
    /// square-root-technology model.
    Prop1Family {
        a: f64,
        rho: f64,
    },
    /// Line `V(k) = Ak + 1/(4(A − 1))`, `A > 1`.
    ClairautGeneral {
        a: f64,
    },
    /// `V(k) = k + √k`, the envelope of the Clairaut lines.
    Prop2Singular,
    AffineLine {
        slope: f64,
        intercept: f64,
    },
    Grid(GridFn),
    MinOf(MinOf),
}

/// Pointwise minimum of several candidates with its precomputed kinks.
#[derive(Debug, Clone, PartialEq)]
pub struct MinOf {
    members: Vec<CandidateValueFn>,
    kinks: Vec<f64>,
}

impl MinOf {
    pub fn members(&self) -> &[CandidateValueFn] {
        &self.members
    }

    /// Points where two members cross while attaining the minimum.
    pub fn kinks(&self) -> &[f64] {
        &self.kinks
    }

    /// Values and slopes of the members attaining the minimum at `k`.
    fn active(&self, k: f64) -> Result<(f64, Vec<f64>)> {
        let values = self.members.iter().map(|m| m.eval(k)).collect::<Result<Vec<_>>>()?;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let tol = 1e-12 * min.abs().max(1.0);
        let mut slopes = Vec::new();
        for (m, v) in self.members.iter().zip(&values) {
            if v - min <= tol {
                slopes.push(m.deriv(k)?);
            }
        }
        Ok((min, slopes))
    }
}

fn check_k(k: f64) -> Result<()> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what: "k", value: k, domain: "(0, inf)" })
    }
}

impl CandidateValueFn {
    pub fn prop1_family(a: f64, rho: f64) -> Result<Self> {
        if !(a > 0.0 && rho > 0.0 && a.is_finite() && rho.is_finite()) {
            return Err(Error::Config(format!("prop1 family needs A > 0 and rho > 0, got A={a}, rho={rho}")));
        }
        Ok(CandidateValueFn::Prop1Family { a, rho })
    }

    pub fn clairaut(a: f64) -> Result<Self> {
        if !(a > 1.0 && a.is_finite()) {
            return Err(Error::Config(format!("Clairaut general solution needs A > 1, got {a}")));
        }
        Ok(CandidateValueFn::ClairautGeneral { a })
    }

    pub fn affine(slope: f64, intercept: f64) -> Self {
        CandidateValueFn::AffineLine { slope, intercept }
    }

    pub fn zero() -> Self {
        Self::affine(0.0, 0.0)
    }

    /// Closed interval on which the candidate can be evaluated.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            CandidateValueFn::Grid(g) => g.domain(),
            CandidateValueFn::MinOf(m) => m.members.iter().fold((0.0, f64::INFINITY), |(lo, hi), c| {
                let (a, b) = c.domain();
                (lo.max(a), hi.min(b))
            }),
            _ => (0.0, f64::INFINITY),
        }
    }

    pub fn eval(&self, k: f64) -> Result<f64> {
        check_k(k)?;
        Ok(match self {
            CandidateValueFn::Prop1Family { a, rho } => a * (2.0 * rho * k.sqrt() - 2.0 * rho).exp(),
            CandidateValueFn::ClairautGeneral { a } => a * k + 0.25 / (a - 1.0),
            CandidateValueFn::Prop2Singular => k + k.sqrt(),
            CandidateValueFn::AffineLine { slope, intercept } => slope * k + intercept,
            CandidateValueFn::Grid(g) => g.eval(k)?,
            CandidateValueFn::MinOf(m) => m.active(k)?.0,
        })
    }

    /// `V'(k)`. Errors at a kink of a pointwise minimum.
    pub fn deriv(&self, k: f64) -> Result<f64> {
        check_k(k)?;
        Ok(match self {
            CandidateValueFn::Prop1Family { rho, .. } => rho * self.eval(k)? / k.sqrt(),
            CandidateValueFn::ClairautGeneral { a } => *a,
            CandidateValueFn::Prop2Singular => 1.0 + 0.5 / k.sqrt(),
            CandidateValueFn::AffineLine { slope, .. } => *slope,
            CandidateValueFn::Grid(g) => g.deriv(k)?,
            CandidateValueFn::MinOf(m) => {
                let (_, slopes) = m.active(k)?;
                let lo = slopes.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if hi - lo > 1e-12 * hi.abs().max(1.0) {
                    return Err(Error::KinkDerivative { k });
                }
                lo
            }
        })
    }

    /// Exact one-sided slopes `(D₊V(k), D₋V(k))`. Smooth forms return the
    /// derivative twice; a pointwise minimum returns the extreme slopes of its
    /// active members, a linear grid its secants.
    pub fn one_sided(&self, k: f64) -> Result<(f64, f64)> {
        check_k(k)?;
        match self {
            CandidateValueFn::Grid(g) => g.one_sided(k),
            CandidateValueFn::MinOf(m) => {
                let (_, slopes) = m.active(k)?;
                let lo = slopes.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Ok((lo, hi))
            }
            _ => {
                let d = self.deriv(k)?;
                Ok((d, d))
            }
        }
    }
}

/// Pointwise minimum of at least two candidates. Kinks are located by
/// scanning pairwise differences for sign changes and bisecting.
pub fn min_combine(members: Vec<CandidateValueFn>) -> Result<CandidateValueFn> {
    if members.len() < 2 {
        return Err(Error::Config("min needs at least two candidates".into()));
    }
    let mut flat = Vec::with_capacity(members.len());
    for m in members {
        match m {
            CandidateValueFn::MinOf(inner) => flat.extend(inner.members),
            other => flat.push(other),
        }
    }
    let mut combined = MinOf { members: flat, kinks: vec![] };
    let (lo, hi) = CandidateValueFn::MinOf(combined.clone()).domain();
    let (lo, hi) = (lo.max(1e-8), hi.min(1e8));
    if !(lo < hi) {
        return Err(Error::Config("min members have disjoint domains".into()));
    }
    let scan = logspace(lo, hi, 4001);
    let mut kinks = Vec::new();
    for i in 0..combined.members.len() {
        for j in (i + 1)..combined.members.len() {
            let (a, b) = (&combined.members[i], &combined.members[j]);
            let diff = |k: f64| a.eval(k).unwrap_or(f64::NAN) - b.eval(k).unwrap_or(f64::NAN);
            let mut prev = diff(scan[0]);
            for w in scan.windows(2) {
                let next = diff(w[1]);
                if next == 0.0 {
                    kinks.push(w[1]);
                } else if prev * next < 0.0 {
                    if let Some(root) = bisect(diff, w[0], w[1], 0.0) {
                        kinks.push(root);
                    }
                }
                prev = next;
            }
        }
    }
    kinks.sort_by(f64::total_cmp);
    kinks.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    // keep crossings that are on the lower envelope
    combined.kinks =
        kinks.into_iter().filter(|&k| combined.active(k).map(|(_, s)| s.len() >= 2).unwrap_or(false)).collect();
    Ok(CandidateValueFn::MinOf(combined))
}

/// Least `A` such that every member of the family with that scale has
/// `V'(k) >= 1` for all `k > 0`: `V'(k)/A` is minimized at `k = 1/(4ρ²)`.
pub fn prop1_min_a(rho: f64) -> f64 {
    let unit = CandidateValueFn::Prop1Family { a: 1.0, rho };
    let k_min = 0.25 / (rho * rho);
    1.0 / unit.deriv(k_min).expect("k_min is positive")
}

/// Witnesses that the family's slope blows up at both ends and that it is
/// not concave.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    /// `(M, δ, V'(δ))` with `V' > M` on the sampled `(0, δ]`.
    pub near_zero: Vec<(f64, f64, f64)>,
    /// `(M, K, V'(K))` with `V' > M` on the sampled `[K, ∞)`.
    pub near_infinity: Vec<(f64, f64, f64)>,
    /// A triple `(x, y, z)` violating the chord inequality and the amount.
    pub chord_violation: Option<((f64, f64, f64), f64)>,
    pub passed: bool,
}

pub const DIVERGENCE_LEVELS: [f64; 3] = [10.0, 100.0, 1000.0];

pub fn divergence_check(candidate: &CandidateValueFn) -> Result<DivergenceReport> {
    if !matches!(candidate, CandidateValueFn::Prop1Family { .. }) {
        return Err(Error::Config("divergence check applies to the prop1 family only".into()));
    }
    let slope = |k: f64| candidate.deriv(k);
    let mut near_zero = Vec::new();
    let mut near_infinity = Vec::new();
    for &m in &DIVERGENCE_LEVELS {
        // δ = 10^{-j}; confirmed down to 1e-12
        let mut found = None;
        for j in 1..=12 {
            let delta = 10f64.powi(-j);
            if slope(delta)? > m {
                let tail = logspace(1e-12, delta, 60);
                if tail.iter().all(|&k| slope(k).map(|d| d > m).unwrap_or(false)) {
                    found = Some((m, delta, slope(delta)?));
                    break;
                }
            }
        }
        near_zero.extend(found);
        // K = 10^{j}; confirmed up to 1e5 (beyond, e^{2ρ√k} overflows doubles)
        let mut found = None;
        for j in 0..=5 {
            let big = 10f64.powi(j);
            if slope(big)? > m {
                let tail = logspace(big, 1e5_f64.max(big), 60);
                if tail.iter().all(|&k| slope(k).map(|d| d > m).unwrap_or(false)) {
                    found = Some((m, big, slope(big)?));
                    break;
                }
            }
        }
        near_infinity.extend(found);
    }
    let triple = (0.1, 1.0, 9.0);
    let xs = [triple.0, triple.1, triple.2];
    let ys = xs.iter().map(|&k| candidate.eval(k)).collect::<Result<Vec<_>>>()?;
    let (viol, _) = max_chord_violation(&xs, &ys);
    let chord_violation = (viol > 0.0).then_some((triple, viol));
    let passed = near_zero.len() == DIVERGENCE_LEVELS.len()
        && near_infinity.len() == DIVERGENCE_LEVELS.len()
        && chord_violation.is_some();
    Ok(DivergenceReport { near_zero, near_infinity, chord_violation, passed })
}
