use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use super::{accumulated_payoff, integrate_autonomous, integrate_policy, IntegratorConfig, Termination, Trajectory};
use crate::candidates::CandidateValueFn;
use crate::hamiltonian::hjb_residual;
use crate::model::{ModelSpec, ProductionSpec};
use crate::numeric::logspace;
use crate::{Error, Result};

/// Closed-form majorant of the pure accumulation path from a supporting line
/// of `f` at `k2`: `e^{p₂t}[k₀ + A(1 − e^{−p₂t})]`, `A = (f(k₂) − p₂k₂)/p₂`.
pub fn accumulation_upper_bound(model: &ModelSpec, k2: f64, p2: f64, k0: f64, t: f64) -> Result<f64> {
    if !(p2 > 0.0) {
        return Err(Error::Domain { what: "p2", value: p2, domain: "(0, inf)" });
    }
    if !(t >= 0.0) {
        return Err(Error::Domain { what: "t", value: t, domain: "[0, inf)" });
    }
    let s = model.production.subdifferential(k2)?;
    let slack = 1e-12 * p2.max(1.0);
    if !(p2 >= s.lower - slack && p2 <= s.upper + slack) {
        return Err(Error::Domain { what: "p2", value: p2, domain: "the subdifferential of f at k2" });
    }
    let a = (model.production.eval(k2)? - p2 * k2) / p2;
    Ok((p2 * t).exp() * (k0 + a * -(-p2 * t).exp_m1()))
}

/// Drift `h(k) = f(k) − c` with constant consumption.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Drift {
    pub production: ProductionSpec,
    pub consumption: f64,
}

impl Drift {
    pub fn eval(&self, k: f64) -> Result<f64> {
        Ok(self.production.eval(k)? - self.consumption)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonResult {
    /// `h_lo <= h_hi` on the sample grid.
    pub dynamics_ordered: bool,
    pub ordered: bool,
    /// `max (k_lo − k_hi)/max(1, k_hi)` over shared times, floored at 0.
    pub max_violation: f64,
    pub tolerance: f64,
}

/// Integrates both drifts and checks `k_lo(t) <= k_hi(t)` within
/// `10 × nominal integrator tolerance`. The upper path is read off linearly
/// at the lower path's nodes (they coincide for fixed-step RK4).
pub fn comparison_check(
    lo: &Drift,
    hi: &Drift,
    k0_lo: f64,
    k0_hi: f64,
    cfg: &IntegratorConfig,
) -> Result<ComparisonResult> {
    if !(k0_lo <= k0_hi) {
        return Err(Error::Config(format!("comparison needs k0_lo <= k0_hi, got {k0_lo} > {k0_hi}")));
    }
    let mut dynamics_ordered = true;
    for k in logspace(1e-3, 1e3, 200) {
        let (a, b) = (lo.eval(k)?, hi.eval(k)?);
        dynamics_ordered &= a <= b + 1e-12 * b.abs().max(1.0);
    }
    let (t_lo, k_lo, _) = integrate_autonomous(|k| lo.eval(k), k0_lo, cfg)?;
    let (t_hi, k_hi, _) = integrate_autonomous(|k| hi.eval(k), k0_hi, cfg)?;
    let end = t_hi[t_hi.len() - 1];
    let mut max_violation = 0.0f64;
    for (i, &t) in t_lo.iter().enumerate() {
        if t > end {
            break;
        }
        let j = t_hi.partition_point(|&s| s <= t).saturating_sub(1);
        let upper = if t_hi[j] == t || j + 1 == t_hi.len() {
            k_hi[j]
        } else {
            let w = (t - t_hi[j]) / (t_hi[j + 1] - t_hi[j]);
            k_hi[j] + w * (k_hi[j + 1] - k_hi[j])
        };
        max_violation = max_violation.max((k_lo[i] - upper) / upper.abs().max(1.0));
    }
    let tolerance = 10.0 * cfg.nominal_tol();
    Ok(ComparisonResult { dynamics_ordered, ordered: max_violation <= tolerance, max_violation, tolerance })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GcVerdict {
    Converges0,
    ReportsLimit(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    /// `(t, e^{−ρt}V(k̂(t)))` at geometric times.
    pub samples: Vec<(f64, f64)>,
    pub verdict: GcVerdict,
}

pub const GC_SAMPLES_PER_DECADE: usize = 10;
pub const GC_DECADES: usize = 3;
pub const GC_ZERO_TOL: f64 = 1e-6;

/// Samples `e^{−ρt}V(k̂(t, k₀))` along the pure accumulation path at ten
/// geometric times per decade over the three decades ending at `horizon`.
/// `Converges0` when the last sample is below `1e-6` and the last decade is
/// nonincreasing; otherwise the last sample is reported as the limit.
pub fn growth_condition_check(
    model: &ModelSpec,
    candidate: &CandidateValueFn,
    k0: f64,
    horizon: f64,
) -> Result<GrowthReport> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
    }
    let n = GC_SAMPLES_PER_DECADE * GC_DECADES;
    let times: Vec<f64> =
        (0..=n).map(|j| horizon * 10f64.powf(j as f64 / GC_SAMPLES_PER_DECADE as f64 - GC_DECADES as f64)).collect();
    let mut samples = Vec::with_capacity(times.len());
    let (mut t, mut k) = (0.0, k0);
    for &ts in &times {
        let span = ts - t;
        if span > 0.0 {
            let cfg = IntegratorConfig::rk4(super::DEFAULT_DT.min(span), span);
            let (_, ks, term) = integrate_autonomous(|x| model.production.eval(x), k, &cfg)?;
            if term != Termination::HorizonReached {
                return Err(Error::Config(format!("pure accumulation hit the floor before t = {ts}")));
            }
            k = ks[ks.len() - 1];
        }
        t = ts;
        samples.push((ts, (-model.rho * ts).exp() * candidate.eval(k)?));
    }
    let last = samples[samples.len() - 1].1;
    let decade = &samples[samples.len() - 1 - GC_SAMPLES_PER_DECADE..];
    let decreasing = decade.windows(2).all(|w| w[1].1.abs() <= w[0].1.abs());
    let verdict =
        if last.abs() < GC_ZERO_TOL && decreasing { GcVerdict::Converges0 } else { GcVerdict::ReportsLimit(last) };
    Ok(GrowthReport { samples, verdict })
}

/// `e^{−ρT}V(k(T))` at the end of a trajectory that reached its horizon.
pub fn transversality_tail(candidate: &CandidateValueFn, traj: &Trajectory, rho: f64) -> Result<f64> {
    if traj.terminated != Termination::HorizonReached {
        return Err(Error::Config("transversality tail needs a trajectory that reached its horizon".into()));
    }
    let t = traj.end_time();
    Ok((-rho * t).exp() * candidate.eval(traj.k[traj.len() - 1])?)
}

/// `sup |d/dt u'(c) − u'(c)(ρ − f'(k))|` over interior nodes, with central
/// differences in time. A diagnostic only.
pub fn euler_residual(model: &ModelSpec, traj: &Trajectory) -> Result<f64> {
    let n = traj.len();
    let mut marginal = Vec::with_capacity(n);
    for &c in &traj.c {
        if !(c > 0.0) {
            return Err(Error::Domain { what: "c along the path", value: c, domain: "(0, inf)" });
        }
        marginal.push(model.utility.marginal(c)?);
    }
    let mut sup = 0.0f64;
    for i in 1..n.saturating_sub(1) {
        let dm = (marginal[i + 1] - marginal[i - 1]) / (traj.t[i + 1] - traj.t[i - 1]);
        let df = model.production.derivative(traj.k[i])?.ok_or(Error::KinkDerivative { k: traj.k[i] })?;
        sup = sup.max((dm - marginal[i] * (model.rho - df)).abs());
    }
    Ok(sup)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub tol_r: f64,
    /// `1e-4·max(1, |V(k0)|)` when `None`.
    pub tol_g: Option<f64>,
    pub tol_t: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { tol_r: 1e-6, tol_g: None, tol_t: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "ACCEPT")]
    Accept,
    #[serde(rename = "REJECT")]
    Reject,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Accept => "ACCEPT",
            Verdict::Reject => "REJECT",
        })
    }
}

/// First failed criterion, checked in this order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RejectReason {
    PolicyUndefined { k: f64, p: f64 },
    HitFloor { t_stop: f64 },
    Residual { value: f64, tol: f64 },
    PayoffGap { value: f64, tol: f64 },
    Tail { value: f64, tol: f64 },
}

impl RejectReason {
    /// Stable kebab-case identifier for reports and scripts.
    pub fn code(&self) -> &'static str {
        match self {
            RejectReason::PolicyUndefined { .. } => "policy-undefined",
            RejectReason::HitFloor { .. } => "hit-floor",
            RejectReason::Residual { .. } => "residual",
            RejectReason::PayoffGap { .. } => "payoff-gap",
            RejectReason::Tail { .. } => "tail",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::PolicyUndefined { k, p } => write!(f, "policy undefined at k = {k} (V' = {p})"),
            RejectReason::HitFloor { t_stop } => write!(f, "capital hit the floor at t = {t_stop}"),
            RejectReason::Residual { value, tol } => write!(f, "HJB residual on path {value:e} > {tol:e}"),
            RejectReason::PayoffGap { value, tol } => write!(f, "payoff gap {value} exceeds {tol:e}"),
            RejectReason::Tail { value, tol } => write!(f, "transversality tail {value} exceeds {tol:e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    pub verdict: Verdict,
    pub reason: Option<RejectReason>,
    pub k0: f64,
    pub horizon: f64,
    pub value_at_k0: f64,
    pub payoff: Option<f64>,
    /// `V(k0) − J`; positive when the candidate overstates the payoff.
    pub payoff_gap: Option<f64>,
    /// Absent when the path stopped at the floor.
    pub transversality_tail: Option<f64>,
    pub residual_on_path: Option<f64>,
    pub euler_residual_norm: Option<f64>,
    pub terminated: Option<Termination>,
    pub tol_r: f64,
    pub tol_g: f64,
    pub tol_t: f64,
}

impl CertificationReport {
    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Accept
    }
}

/// Rolls out the candidate's feedback policy from `k0` and accepts iff the
/// HJB residual vanishes along the path, the realized payoff matches `V(k0)`,
/// the transversality tail vanishes, and the path never reaches the floor.
pub fn certify(
    model: &ModelSpec,
    candidate: &CandidateValueFn,
    k0: f64,
    cfg: &IntegratorConfig,
    tols: &Tolerances,
) -> Result<CertificationReport> {
    let value_at_k0 = candidate.eval(k0)?;
    let tol_g = tols.tol_g.unwrap_or(1e-4 * value_at_k0.abs().max(1.0));
    let mut report = CertificationReport {
        verdict: Verdict::Reject,
        reason: None,
        k0,
        horizon: cfg.horizon,
        value_at_k0,
        payoff: None,
        payoff_gap: None,
        transversality_tail: None,
        residual_on_path: None,
        euler_residual_norm: None,
        terminated: None,
        tol_r: tols.tol_r,
        tol_g,
        tol_t: tols.tol_t,
    };
    let traj = match integrate_policy(model, candidate, k0, cfg) {
        Ok(traj) => traj,
        Err(Error::PolicyUndefined { k, p }) => {
            report.reason = Some(RejectReason::PolicyUndefined { k, p });
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    let mut residual = 0.0f64;
    for &k in &traj.k {
        residual = residual.max(hjb_residual(model, candidate, k)?.abs().to_f64());
    }
    let payoff = match accumulated_payoff(&traj, model.rho) {
        Ok(j) => j,
        Err(Error::MinusInfinitePayoff { .. }) => f64::NEG_INFINITY,
        Err(e) => return Err(e),
    };
    let gap = value_at_k0 - payoff;
    let tail = match traj.terminated {
        Termination::HorizonReached => Some(transversality_tail(candidate, &traj, model.rho)?),
        Termination::HitFloor { .. } => None,
    };
    report.payoff = Some(payoff);
    report.payoff_gap = Some(gap);
    report.transversality_tail = tail;
    report.residual_on_path = Some(residual);
    report.euler_residual_norm = euler_residual(model, &traj).ok();
    report.terminated = Some(traj.terminated);

    report.reason = if let Termination::HitFloor { t_stop } = traj.terminated {
        Some(RejectReason::HitFloor { t_stop })
    } else if !(residual <= tols.tol_r) {
        Some(RejectReason::Residual { value: residual, tol: tols.tol_r })
    } else if !(gap.abs() <= tol_g) {
        Some(RejectReason::PayoffGap { value: gap, tol: tol_g })
    } else {
        tail.filter(|t| !(t.abs() <= tols.tol_t)).map(|t| RejectReason::Tail { value: t, tol: tols.tol_t })
    };
    if report.reason.is_none() {
        report.verdict = Verdict::Accept;
    }
    Ok(report)
}

/// Independent certifications in parallel.
pub fn certify_batch(
    model: &ModelSpec,
    jobs: &[(CandidateValueFn, f64)],
    cfg: &IntegratorConfig,
    tols: &Tolerances,
) -> Vec<Result<CertificationReport>> {
    jobs.par_iter().map(|(c, k0)| certify(model, c, *k0, cfg, tols)).collect()
}

/// `V(k(0)) − [∫₀ᵗ e^{−ρs}u(c(s))ds + e^{−ρt}V(k(t))]`: nonnegative for any
/// feasible path when `V` is the value function, zero along optimal paths.
/// Between nodes, `k` and the partial payoff are interpolated linearly.
pub fn dpp_check(model: &ModelSpec, value_estimate: &CandidateValueFn, traj: &Trajectory, t: f64) -> Result<f64> {
    let (k_t, payoff) = traj.at(t)?;
    if !(k_t > 0.0) {
        return Err(Error::Domain { what: "k(t)", value: k_t, domain: "(0, inf)" });
    }
    let v0 = value_estimate.eval(traj.k[0])?;
    Ok(v0 - (payoff + (-model.rho * t).exp() * value_estimate.eval(k_t)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rollout::{integrate_with_control, pure_accumulation};

    #[test]
    fn upper_bound_examples() {
        let m = ModelSpec::theorem2();
        let b = accumulation_upper_bound(&m, 1.0, 0.5, 1.0, 2.0).unwrap();
        assert!((b - (2.0 * 1f64.exp() - 1.0)).abs() < 1e-12);
        assert!((b - 4.43656).abs() < 1e-5);
        assert_eq!(accumulation_upper_bound(&m, 1.0, 0.5, 1.0, 0.0).unwrap(), 1.0);
        let pure = pure_accumulation(&m, 1.0, &IntegratorConfig::rk4(1e-3, 2.0)).unwrap();
        assert!(b >= *pure.k.last().unwrap());
        assert!(matches!(accumulation_upper_bound(&m, 1.0, 0.7, 1.0, 1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn comparison_examples() {
        let f = ProductionSpec::Sqrt {};
        let cfg = IntegratorConfig::rk4(1e-3, 5.0);
        let hi = Drift { production: f.clone(), consumption: 0.0 };
        let lo = Drift { production: f.clone(), consumption: 0.3 };
        let r = comparison_check(&lo, &hi, 1.0, 1.0, &cfg).unwrap();
        assert!(r.dynamics_ordered && r.ordered);
        let r = comparison_check(&hi, &hi, 1.0, 1.0, &cfg).unwrap();
        assert_eq!(r.max_violation, 0.0);
        let r = comparison_check(&hi, &lo, 1.0, 1.0, &cfg).unwrap();
        assert!(!r.dynamics_ordered && !r.ordered);
    }

    #[test]
    fn growth_examples() {
        let m = ModelSpec::theorem2();
        let r = growth_condition_check(&m, &CandidateValueFn::affine(1.0, 0.0), 1.0, 30.0).unwrap();
        assert_eq!(r.verdict, GcVerdict::Converges0);
        assert_eq!(r.samples.len(), 31);
        assert!((r.samples[30].0 - 30.0).abs() < 1e-12);
        let r = growth_condition_check(&m, &CandidateValueFn::zero(), 1.0, 30.0).unwrap();
        assert_eq!(r.verdict, GcVerdict::Converges0);
        let r = growth_condition_check(&ModelSpec::prop2(), &CandidateValueFn::Prop2Singular, 2.0, 30.0).unwrap();
        match r.verdict {
            GcVerdict::ReportsLimit(l) => assert!((l - 2.0).abs() < 1e-3, "{l}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tails_and_euler() {
        let m = ModelSpec::prop2();
        let cfg = IntegratorConfig::for_model(&m);
        let traj = integrate_policy(&m, &CandidateValueFn::Prop2Singular, 1.0, &cfg).unwrap();
        let tail = transversality_tail(&CandidateValueFn::Prop2Singular, &traj, 1.0).unwrap();
        assert!((tail - 2.0 * (-30f64).exp()).abs() < 1e-20);
        assert_eq!(transversality_tail(&CandidateValueFn::zero(), &traj, 1.0).unwrap(), 0.0);
        assert!(euler_residual(&m, &traj).unwrap() < 1e-12);

        let clairaut = CandidateValueFn::clairaut(2.0).unwrap();
        let traj = integrate_policy(&m, &clairaut, 1.0, &cfg).unwrap();
        let tail = transversality_tail(&clairaut, &traj, 1.0).unwrap();
        assert!((tail - 1.5).abs() < 1e-6, "{tail}");
        assert!(euler_residual(&m, &traj).unwrap() < 1e-12);

        let t2 = ModelSpec::theorem2();
        let traj = integrate_with_control(&t2, |_| Ok(0.5), 0.25, &IntegratorConfig::for_model(&t2)).unwrap();
        assert!(euler_residual(&t2, &traj).unwrap() < 1e-12);
    }

    #[test]
    fn certification_examples() {
        let m = ModelSpec::prop2();
        let cfg = IntegratorConfig::for_model(&m);
        let tols = Tolerances::default();
        let r = certify(&m, &CandidateValueFn::Prop2Singular, 1.0, &cfg, &tols).unwrap();
        assert!(r.accepted(), "{r:?}");
        assert!(r.payoff_gap.unwrap().abs() < 1e-6);

        let clairaut = CandidateValueFn::clairaut(2.0).unwrap();
        let r = certify(&m, &clairaut, 1.0, &cfg, &tols).unwrap();
        assert_eq!(r.verdict, Verdict::Reject);
        assert!(matches!(r.reason, Some(RejectReason::PayoffGap { value, .. }) if (value - 1.5).abs() < 1e-6));
        assert!((r.transversality_tail.unwrap() - 1.5).abs() < 1e-6);

        let r = certify(&m, &clairaut, 0.2, &cfg, &tols).unwrap();
        assert!(matches!(r.reason, Some(RejectReason::HitFloor { t_stop }) if (t_stop - 5f64.ln()).abs() < 1e-6));
        assert_eq!(r.transversality_tail, None);

        let p1 = ModelSpec::prop1(1.0);
        let r = certify(
            &p1,
            &CandidateValueFn::prop1_family(2.0, 1.0).unwrap(),
            1.0,
            &IntegratorConfig::for_model(&p1),
            &tols,
        )
        .unwrap();
        assert!(matches!(r.reason, Some(RejectReason::PolicyUndefined { .. })));

        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"verdict\":\"REJECT\""));
    }

    #[test]
    fn dpp_examples() {
        let m = ModelSpec::prop2();
        let v = CandidateValueFn::Prop2Singular;
        let cfg = IntegratorConfig::for_model(&m);
        let optimal = integrate_policy(&m, &v, 1.0, &cfg).unwrap();
        assert!(dpp_check(&m, &v, &optimal, 5.0).unwrap().abs() < 1e-9);
        let lazy = integrate_with_control(&m, |_| Ok(0.25), 1.0, &cfg).unwrap();
        assert!(dpp_check(&m, &v, &lazy, 2.0).unwrap() > 0.0);
        assert!(dpp_check(&m, &v, &lazy, 1e-6).unwrap().abs() < 1e-5);
    }
}
