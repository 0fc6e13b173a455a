//! Integrates the HJB equation as an implicit first-order ODE.
//!
//! At each `k` the co-state `p = V'(k)` is a root of `H(k, p) = ρV(k)`. Since
//! `H(k, ·)` is convex with minimum at `p_mid = u'(f(k))`, there are two roots:
//! the low branch (`c > f(k)`, capital falls) and the high branch (`c < f(k)`,
//! capital grows). Concave increasing solutions use the low branch right of
//! the steady state and the high branch left of it; the branches meet at the
//! steady state, where `V = u(f(k*))/ρ` is the only forced value.

use serde::Serialize;

use super::{CandidateValueFn, GridFn};
use crate::hamiltonian::{hamiltonian, hjb_residual};
use crate::model::{audit_assumptions, find_steady_state, Condition, ModelSpec};
use crate::numeric::bisect;
use crate::{Error, ExtendedReal, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStrategy {
    /// Start at the steady state and integrate outward (default).
    SteadyStateAnchor,
    /// Bisect on `V` at each end of the range until the trajectory lands on
    /// the steady-state expansion.
    Shooting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    /// Step in `k`; `1e-3·k*` when `None`.
    pub step: Option<f64>,
    pub strategy: SolveStrategy,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { step: None, strategy: SolveStrategy::SteadyStateAnchor }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HjbSolution {
    pub grid: GridFn,
    pub k_star: f64,
    pub v_star: f64,
    /// Max |HJB residual| over the knots.
    pub knot_residual: f64,
    /// Max |HJB residual| at knot midpoints, through the interpolant.
    pub midpoint_residual: f64,
}

impl HjbSolution {
    pub fn candidate(&self) -> CandidateValueFn {
        CandidateValueFn::Grid(self.grid.clone())
    }
}

/// Knot residual bound the solver enforces on its own output.
pub const SELF_CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Branch {
    Low,
    High,
}

fn co_state(model: &ModelSpec, k: f64, v: f64, branch: Branch) -> std::result::Result<f64, String> {
    let u = &model.utility;
    let fk = model.production.eval(k).map_err(|e| e.to_string())?;
    let p_mid = u.marginal(fk).map_err(|e| e.to_string())?;
    let target = model.rho * v;
    let h = |p: f64| hamiltonian(model, k, p).map(ExtendedReal::to_f64).unwrap_or(f64::NAN);
    let h_min = h(p_mid);
    if !h_min.is_finite() {
        return Err(format!("Hamiltonian minimum is not finite at k = {k}"));
    }
    let gap = h_min - target;
    if gap >= 0.0 {
        if gap <= 1e-12 * target.abs().max(1.0) {
            return Ok(p_mid);
        }
        return Err(format!("no co-state at k = {k}: V = {v} lies below the stationary payoff"));
    }
    let g = |p: f64| h(p) - target;
    let outer = match branch {
        Branch::Low => {
            let p_dom = u.conjugate_threshold();
            (1..=200).map(|j| p_dom + (p_mid - p_dom) * 0.5f64.powi(j)).find(|&p| p > p_dom && g(p) > 0.0)
        }
        Branch::High => (1..=200).map(|j| p_mid * 2f64.powi(j)).find(|&p| g(p) > 0.0),
    };
    let outer = outer.ok_or_else(|| format!("co-state bracket lost at k = {k}"))?;
    let (lo, hi) = if outer < p_mid { (outer, p_mid) } else { (p_mid, outer) };
    bisect(g, lo, hi, 0.0).ok_or_else(|| format!("co-state bisection failed at k = {k}"))
}

struct Sweep {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

fn next_knot(k0: f64, end: f64, h: f64, j: usize) -> f64 {
    let dir = (end - k0).signum();
    let next = k0 + dir * h * j as f64;
    // a sliver shorter than h/2 is folded into this step
    if (end - next) * dir < 0.5 * h {
        end
    } else {
        next
    }
}

fn check_continuity(k: f64, next: f64, dir: f64, p_prev: f64, p_next: f64) -> std::result::Result<(), (f64, String)> {
    let concave = match dir > 0.0 {
        true => p_next <= p_prev * (1.0 + 1e-12),
        false => p_next >= p_prev * (1.0 - 1e-12),
    };
    if !(p_next > 0.0) || !concave {
        return Err((k, format!("branch continuity lost at k = {next}: V' jumped from {p_prev} to {p_next}")));
    }
    Ok(())
}

/// RK4 in `k` on `V' = p(k, V)` from `(k0, v0)` toward `end`; each step lands
/// on `k0 + j·h` except the last, which lands on `end` and may be up to
/// `1.5h` long. Stages that fall below the stationary payoff fail, which is
/// what shooting relies on; near `k*` this form is ill-conditioned.
fn integrate_implicit(
    model: &ModelSpec,
    k0: f64,
    v0: f64,
    end: f64,
    h: f64,
    branch: Branch,
) -> std::result::Result<Sweep, (f64, String)> {
    let dir = (end - k0).signum();
    let root = |k: f64, v: f64| co_state(model, k, v, branch).map_err(|e| (k, e));
    let mut sweep = Sweep { knots: vec![k0], values: vec![v0], slopes: vec![root(k0, v0)?] };
    for j in 1.. {
        let k = *sweep.knots.last().unwrap();
        if k == end {
            break;
        }
        let next = next_knot(k0, end, h, j);
        let s = next - k;
        let v = *sweep.values.last().unwrap();
        let p1 = *sweep.slopes.last().unwrap();
        let p2 = root(k + 0.5 * s, v + 0.5 * s * p1)?;
        let p3 = root(k + 0.5 * s, v + 0.5 * s * p2)?;
        let p4 = root(next, v + s * p3)?;
        let v_next = v + s / 6.0 * (p1 + 2.0 * p2 + 2.0 * p3 + p4);
        let p_next = root(next, v_next).map_err(|(_, e)| (k, e))?;
        check_continuity(k, next, dir, p1, p_next)?;
        sweep.knots.push(next);
        sweep.values.push(v_next);
        sweep.slopes.push(p_next);
    }
    Ok(sweep)
}

/// RK4 on the pair `(V, p)` with `V' = p` and, from differentiating the HJB
/// equation, `p' = p(ρ − f'(k))/(f(k) − c(p))`. Moving away from `k*` this
/// follows the saddle path backward in time, which is stable. At each knot
/// the stored slope is re-selected as the branch root of `H(k, p) = ρV`.
fn integrate_costate(
    model: &ModelSpec,
    k0: f64,
    v0: f64,
    p0: f64,
    end: f64,
    h: f64,
    branch: Branch,
) -> std::result::Result<Sweep, (f64, String)> {
    let dir = (end - k0).signum();
    let rhs = |k: f64, p: f64| -> std::result::Result<f64, (f64, String)> {
        let fail = |e: Error| (k, e.to_string());
        let fk = model.production.eval(k).map_err(fail)?;
        let df = model
            .production
            .derivative(k)
            .map_err(fail)?
            .ok_or_else(|| (k, format!("production has a kink at k = {k}")))?;
        let c = model.utility.marginal_inverse(p).map_err(fail)?;
        let dp = p * (model.rho - df) / (fk - c);
        if dp.is_finite() {
            Ok(dp)
        } else {
            Err((k, format!("co-state equation is singular at k = {k}")))
        }
    };
    let mut sweep = Sweep { knots: vec![k0], values: vec![v0], slopes: vec![p0] };
    let mut p = p0;
    for j in 1.. {
        let k = *sweep.knots.last().unwrap();
        if k == end {
            break;
        }
        let next = next_knot(k0, end, h, j);
        let s = next - k;
        let v = *sweep.values.last().unwrap();
        let m1 = rhs(k, p)?;
        let p2 = p + 0.5 * s * m1;
        let m2 = rhs(k + 0.5 * s, p2)?;
        let p3 = p + 0.5 * s * m2;
        let m3 = rhs(k + 0.5 * s, p3)?;
        let p4 = p + s * m3;
        let m4 = rhs(next, p4)?;
        let v_next = v + s / 6.0 * (p + 2.0 * p2 + 2.0 * p3 + p4);
        p += s / 6.0 * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
        let root = co_state(model, next, v_next, branch).map_err(|e| (k, e))?;
        if (root - p).abs() > 1e-4 * p.abs().max(1.0) {
            return Err((k, format!("root {root} at k = {next} is off the integrated branch {p}")));
        }
        check_continuity(k, next, dir, *sweep.slopes.last().unwrap(), root)?;
        sweep.knots.push(next);
        sweep.values.push(v_next);
        sweep.slopes.push(root);
    }
    Ok(sweep)
}

struct Anchor {
    k: f64,
    v: f64,
    p: f64,
    /// `V''(k*)` on the concave branch.
    q: f64,
}

impl Anchor {
    fn taylor(&self, k: f64) -> f64 {
        let d = k - self.k;
        self.v + self.p * d + 0.5 * self.q * d * d
    }
}

/// `V''(k*)` from differentiating the HJB equation twice at the steady state:
/// with `c(p) = (u')⁻¹(p)`, the curvature solves `c'(p*)q² − ρq − p*f''(k*) = 0`;
/// the negative root is the concave one.
fn anchor(model: &ModelSpec, k_star: f64) -> Result<Anchor> {
    let c_star = model.production.eval(k_star)?;
    let v = model.utility.eval(c_star)?.finite().ok_or_else(|| Error::ConditionFailed {
        condition: "finite steady-state payoff".into(),
        detail: format!("u(f(k*)) is infinite at k* = {k_star}"),
    })? / model.rho;
    let p = model.utility.marginal(c_star)?;
    let u2 = model.utility.curvature(c_star)?;
    if !(u2 < 0.0) {
        return Err(Error::ConditionFailed {
            condition: Condition::Thm2I.to_string(),
            detail: "u'' must be negative at the steady-state consumption".into(),
        });
    }
    let dc = 1.0 / u2;
    let f2 = model.production.curvature(k_star)?;
    let disc = model.rho * model.rho + 4.0 * dc * p * f2;
    let q = (model.rho + disc.max(0.0).sqrt()) / (2.0 * dc);
    Ok(Anchor { k: k_star, v, p, q })
}

fn anchored_sweep(model: &ModelSpec, a: &Anchor, end: f64, h: f64, branch: Branch) -> Result<Sweep> {
    if end == a.k {
        return Ok(Sweep { knots: vec![a.k], values: vec![a.v], slopes: vec![a.p] });
    }
    let dir = (end - a.k).signum();
    let first = if (end - a.k).abs() <= h { end } else { a.k + dir * h };
    let d = first - a.k;
    let rest = integrate_costate(model, first, a.taylor(first), a.p + a.q * d, end, h, branch)
        .map_err(|(k, reason)| Error::SolveFailed { last_good_k: k, reason })?;
    let mut sweep = Sweep { knots: vec![a.k], values: vec![a.v], slopes: vec![a.p] };
    sweep.knots.extend(rest.knots);
    sweep.values.extend(rest.values);
    sweep.slopes.extend(rest.slopes);
    Ok(sweep)
}

/// Number of steps next to `k*` that shooting leaves to the anchored sweep.
const SHOOTING_GAP: f64 = 8.0;

/// Integrates inward from `outer` and bisects on `V(outer)` until the
/// trajectory meets the steady-state expansion a few steps short of `k*`;
/// the remaining gap is filled from the anchor.
fn shooting_sweep(model: &ModelSpec, a: &Anchor, outer: f64, h: f64, branch: Branch) -> Result<Sweep> {
    if outer == a.k {
        return Ok(Sweep { knots: vec![a.k], values: vec![a.v], slopes: vec![a.p] });
    }
    let dir = (a.k - outer).signum();
    if (a.k - outer).abs() <= SHOOTING_GAP * h {
        return anchored_sweep(model, a, outer, h, branch);
    }
    let stop = a.k - dir * SHOOTING_GAP * h;
    let near = anchored_sweep(model, a, stop, h, branch)?;
    let target = *near.values.last().unwrap();
    // V lies above the stationary payoff and below the tangent at k*
    let stationary = model.utility.eval(model.production.eval(outer)?)?.to_f64() / model.rho;
    let mut lo = stationary.max(if dir < 0.0 { a.v } else { f64::NEG_INFINITY });
    let mut hi = a.v + a.p * (outer - a.k);
    if !(lo.is_finite() && hi >= lo) {
        return Err(Error::SolveFailed { last_good_k: outer, reason: "shooting bracket is empty".into() });
    }
    let trial = |v0: f64| -> Option<Sweep> {
        let s = integrate_implicit(model, outer, v0, stop, h, branch).ok()?;
        (*s.values.last().unwrap() >= target).then_some(s)
    };
    if trial(hi).is_none() {
        return Err(Error::SolveFailed {
            last_good_k: outer,
            reason: "shooting upper bracket misses the anchor".into(),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if trial(mid).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let far = trial(hi).expect("upper bracket reaches the anchor");
    // order from k* outward, like the anchored sweep
    let mut s = near;
    s.knots.extend(far.knots.iter().rev().skip(1));
    s.values.extend(far.values.iter().rev().skip(1));
    s.slopes.extend(far.slopes.iter().rev().skip(1));
    Ok(s)
}

/// Solves the HJB equation on `[k_lo, k_hi]` for models meeting the sufficient
/// conditions, anchored at the steady state.
pub fn solve_hjb_from_steady_state(
    model: &ModelSpec,
    k_lo: f64,
    k_hi: f64,
    opts: &SolveOptions,
) -> Result<HjbSolution> {
    let audit = audit_assumptions(model);
    for cond in [Condition::R, Condition::U, Condition::F, Condition::Thm2I, Condition::Thm2II] {
        if !audit.passed(cond) {
            return Err(Error::ConditionFailed {
                condition: cond.to_string(),
                detail: audit.check(cond).detail.clone(),
            });
        }
    }
    let w = audit.witness.expect("Thm2(ii) passed");
    let k_star = find_steady_state(model, w.k1, w.k2).map_err(|e| match e {
        Error::NotIsolated { .. } => {
            Error::ConditionFailed { condition: "isolated steady state".into(), detail: e.to_string() }
        }
        other => other,
    })?;
    if !(k_lo > 0.0 && k_lo <= k_star && k_star <= k_hi) {
        return Err(Error::Config(format!("range [{k_lo}, {k_hi}] must contain the steady state {k_star}")));
    }
    let h = opts.step.unwrap_or(1e-3 * k_star);
    if !(h > 0.0) {
        return Err(Error::Config(format!("step must be positive, got {h}")));
    }
    let a = anchor(model, k_star)?;
    let (left, right) = match opts.strategy {
        SolveStrategy::SteadyStateAnchor => {
            (anchored_sweep(model, &a, k_lo, h, Branch::High)?, anchored_sweep(model, &a, k_hi, h, Branch::Low)?)
        }
        SolveStrategy::Shooting => {
            (shooting_sweep(model, &a, k_lo, h, Branch::High)?, shooting_sweep(model, &a, k_hi, h, Branch::Low)?)
        }
    };
    let mut knots: Vec<f64> = left.knots.iter().rev().copied().collect();
    let mut values: Vec<f64> = left.values.iter().rev().copied().collect();
    let mut slopes: Vec<f64> = left.slopes.iter().rev().copied().collect();
    knots.extend(right.knots.iter().skip(1));
    values.extend(right.values.iter().skip(1));
    slopes.extend(right.slopes.iter().skip(1));
    let grid = GridFn::new(knots, values, slopes)?;

    let candidate = CandidateValueFn::Grid(grid.clone());
    let residual_at = |k: f64| hjb_residual(model, &candidate, k).map(|r| r.abs().to_f64());
    let mut knot_residual = 0.0f64;
    for &k in grid.knots() {
        knot_residual = knot_residual.max(residual_at(k)?);
    }
    let mut midpoint_residual = 0.0f64;
    for w in grid.knots().windows(2) {
        midpoint_residual = midpoint_residual.max(residual_at(0.5 * (w[0] + w[1]))?);
    }
    if !(knot_residual <= SELF_CHECK_TOL) {
        return Err(Error::SolveFailed {
            last_good_k: k_hi,
            reason: format!("self-check failed: knot residual {knot_residual:e} > {SELF_CHECK_TOL:e}"),
        });
    }
    Ok(HjbSolution { grid, k_star, v_star: a.v, knot_residual, midpoint_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{linspace, max_chord_violation};

    #[test]
    fn anchor_curvature_for_theorem2_model() {
        let a = anchor(&ModelSpec::theorem2(), 0.25).unwrap();
        let r2 = 2f64.sqrt();
        assert!((a.v - r2).abs() < 1e-15);
        assert!((a.p - r2).abs() < 1e-15);
        // q² + √2 q − 4 = 0, concave root −2√2
        assert!((a.q + 2.0 * r2).abs() < 1e-12);
    }

    #[test]
    fn theorem2_solution() {
        let sol = solve_hjb_from_steady_state(&ModelSpec::theorem2(), 0.1, 2.0, &SolveOptions::default()).unwrap();
        let r2 = 2f64.sqrt();
        assert!((sol.k_star - 0.25).abs() < 1e-10);
        assert!((sol.grid.eval(0.25).unwrap() - r2).abs() < 1e-6);
        assert!((sol.grid.deriv(0.25).unwrap() - r2).abs() < 1e-6);
        assert!(sol.knot_residual < 1e-6);
        assert!(sol.midpoint_residual < 1e-6, "{}", sol.midpoint_residual);
        let ks = sol.grid.knots();
        assert_eq!(ks[0], 0.1);
        assert_eq!(ks[ks.len() - 1], 2.0);
        // concave and increasing on the knot set
        assert!(sol.grid.values().windows(2).all(|w| w[1] > w[0]));
        assert!(max_chord_violation(ks, sol.grid.values()).0 <= 1e-12);
    }

    #[test]
    fn shooting_agrees_with_anchor() {
        let m = ModelSpec::theorem2();
        let anchored = solve_hjb_from_steady_state(&m, 0.1, 2.0, &SolveOptions::default()).unwrap();
        let opts = SolveOptions { step: None, strategy: SolveStrategy::Shooting };
        let shot = solve_hjb_from_steady_state(&m, 0.1, 2.0, &opts).unwrap();
        for k in linspace(0.1, 2.0, 40) {
            let (a, b) = (anchored.grid.eval(k).unwrap(), shot.grid.eval(k).unwrap());
            assert!((a - b).abs() < 1e-6, "k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn crra_model_solves() {
        use crate::model::{ProductionSpec, UtilitySpec};
        let m = ModelSpec { rho: 0.5, utility: UtilitySpec::Crra { theta: 2.0 }, production: ProductionSpec::Sqrt {} };
        let sol = solve_hjb_from_steady_state(&m, 0.2, 3.0, &SolveOptions::default()).unwrap();
        assert!((sol.k_star - 1.0).abs() <= 1e-10);
        assert!(sol.midpoint_residual < 1e-6);
        assert!(sol.knot_residual < 1e-6);
    }

    #[test]
    fn rejects_models_outside_the_theorem() {
        match solve_hjb_from_steady_state(&ModelSpec::prop2(), 0.1, 2.0, &SolveOptions::default()) {
            Err(Error::ConditionFailed { .. }) => {}
            other => panic!("{other:?}"),
        }
        match solve_hjb_from_steady_state(&ModelSpec::prop1(1.0), 0.1, 2.0, &SolveOptions::default()) {
            Err(Error::ConditionFailed { condition, .. }) => assert_eq!(condition, "Thm2(i)"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            solve_hjb_from_steady_state(&ModelSpec::theorem2(), 0.5, 2.0, &SolveOptions::default()),
            Err(Error::Config(_))
        ));
    }
}
