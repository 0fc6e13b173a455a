//! Closed-loop and open-loop capital paths, discounted payoffs, and the
//! checks built on them (transversality, growth condition, comparison,
//! certification, dynamic-programming inequalities).

mod certify;

use std::io::Write;

use serde::Serialize;

pub use certify::{
    accumulation_upper_bound, certify, certify_batch, comparison_check, dpp_check, euler_residual,
    growth_condition_check, transversality_tail, CertificationReport, ComparisonResult, Drift, GcVerdict, GrowthReport,
    RejectReason, Tolerances, Verdict,
};

use crate::candidates::CandidateValueFn;
use crate::hamiltonian::{optimal_control, Control};
use crate::model::ModelSpec;
use crate::numeric::bisect;
use crate::{Error, ExtendedReal, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Method {
    Rk4 {
        dt: f64,
    },
    /// Dormand–Prince 5(4) with per-step error control.
    Rk45 {
        rtol: f64,
        atol: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub horizon: f64,
    pub k_floor: f64,
}

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_K_FLOOR: f64 = 1e-9;

impl IntegratorConfig {
    /// RK4 with `dt = 1e-3`, `T = 30/ρ`, floor `1e-9`.
    pub fn for_model(model: &ModelSpec) -> Self {
        Self::rk4(DEFAULT_DT, 30.0 / model.rho)
    }

    pub fn rk4(dt: f64, horizon: f64) -> Self {
        Self { method: Method::Rk4 { dt }, horizon, k_floor: DEFAULT_K_FLOOR }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.method {
            Method::Rk4 { dt } => dt > 0.0 && dt.is_finite(),
            Method::Rk45 { rtol, atol } => rtol > 0.0 && atol > 0.0,
        };
        if !ok || !(self.horizon > 0.0 && self.horizon.is_finite()) || !(self.k_floor > 0.0) {
            return Err(Error::Config(format!("invalid integrator config {self:?}")));
        }
        Ok(())
    }

    /// Per-path accuracy the integrator is expected to deliver: `dt⁴` for
    /// RK4, `rtol` for RK45.
    pub fn nominal_tol(&self) -> f64 {
        match self.method {
            Method::Rk4 { dt } => dt.powi(4),
            Method::Rk45 { rtol, .. } => rtol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Termination {
    HorizonReached,
    HitFloor { t_stop: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub rho: f64,
    pub t: Vec<f64>,
    pub k: Vec<f64>,
    pub c: Vec<f64>,
    /// `u(c)` at the nodes.
    pub utility: Vec<ExtendedReal>,
    /// `∫₀^{t_i} e^{-ρs} u(c(s)) ds`; `-inf` once a node has `u = -inf`.
    pub payoff_partial: Vec<f64>,
    pub terminated: Termination,
}

/// `∫₀^h e^{-ρs}(u₀ + (u₁ − u₀)s/h) ds`: exact for `u` linear between nodes.
fn discounted_segment(rho: f64, h: f64, u0: f64, u1: f64) -> f64 {
    let x = rho * h;
    // ∫₀^h e^{-ρs} ds = h·(1 − e^{-x})/x and ∫₀^h e^{-ρs} s/h ds = h·(1 − e^{-x}(1 + x))/x²
    let (level, ramp) = if x < 0.1 {
        let (mut level, mut ramp, mut term) = (0.0, 0.0, 1.0);
        // series in x: level = Σ (−x)^n/(n+1)!, ramp = Σ (−x)^n/(n!(n+2))
        for n in 0..18 {
            let nf = n as f64;
            level += term / (nf + 1.0);
            ramp += term / (nf + 2.0);
            term *= -x / (nf + 1.0);
        }
        (level, ramp)
    } else {
        (-(-x).exp_m1() / x, (1.0 - (-x).exp() * (1.0 + x)) / (x * x))
    };
    h * (u0 * level + (u1 - u0) * ramp)
}

impl Trajectory {
    fn from_nodes(model: &ModelSpec, t: Vec<f64>, k: Vec<f64>, c: Vec<f64>, terminated: Termination) -> Result<Self> {
        let utility = c.iter().map(|&ci| model.utility.eval(ci)).collect::<Result<Vec<_>>>()?;
        let payoff_partial = partial_payoffs(model.rho, &t, &utility);
        Ok(Self { rho: model.rho, t, k, c, utility, payoff_partial, terminated })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        *self.t.last().expect("trajectory has nodes")
    }

    pub fn hit_floor(&self) -> bool {
        matches!(self.terminated, Termination::HitFloor { .. })
    }

    /// `(k(t), payoff_partial(t))`, linear between nodes.
    pub fn at(&self, t: f64) -> Result<(f64, f64)> {
        if !(t >= 0.0 && t <= self.end_time()) {
            return Err(Error::Domain { what: "t", value: t, domain: "[0, end of trajectory]" });
        }
        let i = self.t.partition_point(|&s| s <= t).saturating_sub(1).min(self.len().saturating_sub(2));
        if self.len() == 1 || t == self.t[i] {
            return Ok((self.k[i], self.payoff_partial[i]));
        }
        if t == self.t[i + 1] {
            return Ok((self.k[i + 1], self.payoff_partial[i + 1]));
        }
        let w = (t - self.t[i]) / (self.t[i + 1] - self.t[i]);
        let lerp = |a: f64, b: f64| a + w * (b - a);
        Ok((lerp(self.k[i], self.k[i + 1]), lerp(self.payoff_partial[i], self.payoff_partial[i + 1])))
    }

    /// Columns `t, k, c, payoff_partial`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "k", "c", "payoff_partial"])?;
        for i in 0..self.len() {
            let payoff =
                ExtendedReal::from_f64(self.payoff_partial[i]).map(|p| p.to_string()).unwrap_or_else(|_| "nan".into());
            w.write_record([self.t[i].to_string(), self.k[i].to_string(), self.c[i].to_string(), payoff])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn partial_payoffs(rho: f64, t: &[f64], utility: &[ExtendedReal]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    out.push(acc);
    for i in 1..t.len() {
        let (u0, u1) = (utility[i - 1].to_f64(), utility[i].to_f64());
        if u0 == f64::NEG_INFINITY || u1 == f64::NEG_INFINITY {
            acc = f64::NEG_INFINITY;
        } else if acc.is_finite() {
            acc += (-rho * t[i - 1]).exp() * discounted_segment(rho, t[i] - t[i - 1], u0, u1);
        }
        out.push(acc);
    }
    if utility.first().map(|u| *u == ExtendedReal::NegInf).unwrap_or(false) {
        out[0] = f64::NEG_INFINITY;
    }
    out
}

/// Discounted payoff to termination, recomputed from the trajectory's nodes:
/// the quadrature treats `u(c(t))` as linear between nodes and integrates the
/// discount factor exactly, so constant paths are integrated without error.
pub fn accumulated_payoff(traj: &Trajectory, rho: f64) -> Result<f64> {
    if traj.is_empty() {
        return Err(Error::Config("empty trajectory".into()));
    }
    if let Some(i) = traj.utility.iter().position(|u| *u == ExtendedReal::NegInf) {
        return Err(Error::MinusInfinitePayoff { t: traj.t[i] });
    }
    Ok(*partial_payoffs(rho, &traj.t, &traj.utility).last().unwrap())
}

fn rk4_step<F: Fn(f64) -> Result<f64>>(rhs: &F, floor: f64, k: f64, h: f64) -> Result<f64> {
    let g = |x: f64| rhs(x.max(floor));
    let m1 = g(k)?;
    let m2 = g(k + 0.5 * h * m1)?;
    let m3 = g(k + 0.5 * h * m2)?;
    let m4 = g(k + h * m3)?;
    Ok(k + h / 6.0 * (m1 + 2.0 * m2 + 2.0 * m3 + m4))
}

// Dormand–Prince 5(4) tableau; the dynamics are autonomous so the nodes are not needed
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// One Dormand–Prince step: `(k_new, error estimate)`.
fn dp_step<F: Fn(f64) -> Result<f64>>(rhs: &F, floor: f64, k: f64, h: f64) -> Result<(f64, f64)> {
    let mut m = [0.0; 7];
    for s in 0..7 {
        let incr: f64 = (0..s).map(|j| DP_A[s][j] * m[j]).sum();
        m[s] = rhs((k + h * incr).max(floor))?;
    }
    let k5 = k + h * (0..7).map(|s| DP_B5[s] * m[s]).sum::<f64>();
    let k4 = k + h * (0..7).map(|s| DP_B4[s] * m[s]).sum::<f64>();
    Ok((k5, (k5 - k4).abs()))
}

/// Time at which one RK4 step from `(t, k)` reaches the floor.
fn floor_crossing<F: Fn(f64) -> Result<f64>>(rhs: &F, floor: f64, t: f64, k: f64, h: f64) -> f64 {
    let g = |tau: f64| rk4_step(rhs, floor, k, tau).map(|x| x - floor).unwrap_or(f64::NAN);
    t + bisect(g, 0.0, h, 0.0).unwrap_or(h)
}

/// Integrates the autonomous `k̇ = rhs(k)` from `k0`. Stages see `k` clamped to
/// the floor; a step that ends at or below the floor is shortened to land on
/// it and terminates the path.
pub(crate) fn integrate_autonomous<F>(
    rhs: F,
    k0: f64,
    cfg: &IntegratorConfig,
) -> Result<(Vec<f64>, Vec<f64>, Termination)>
where
    F: Fn(f64) -> Result<f64>,
{
    cfg.validate()?;
    if !(k0 > cfg.k_floor) {
        return Err(Error::Domain { what: "k0", value: k0, domain: "(k_floor, inf)" });
    }
    let floor = cfg.k_floor;
    let (mut ts, mut ks) = (vec![0.0], vec![k0]);
    match cfg.method {
        Method::Rk4 { dt } => {
            let n = (cfg.horizon / dt - 1e-9).ceil().max(1.0) as usize;
            let h = cfg.horizon / n as f64;
            for j in 1..=n {
                let (t, k) = (ts[j - 1], ks[j - 1]);
                let next = rk4_step(&rhs, floor, k, h)?;
                if next <= floor {
                    let t_stop = floor_crossing(&rhs, floor, t, k, h);
                    ts.push(t_stop);
                    ks.push(floor);
                    return Ok((ts, ks, Termination::HitFloor { t_stop }));
                }
                ts.push(if j == n { cfg.horizon } else { j as f64 * h });
                ks.push(next);
            }
        }
        Method::Rk45 { rtol, atol } => {
            let mut h = (1e-3 * cfg.horizon).min(1e-2);
            let h_max = cfg.horizon / 20.0;
            let (mut t, mut k) = (0.0, k0);
            while t < cfg.horizon {
                h = h.min(cfg.horizon - t);
                let (next, err) = dp_step(&rhs, floor, k, h)?;
                let scale = atol + rtol * k.abs().max(next.abs());
                let ratio = err / scale;
                if ratio <= 1.0 || h <= 1e-12 * cfg.horizon {
                    if next <= floor {
                        let t_stop = floor_crossing(&rhs, floor, t, k, h);
                        ts.push(t_stop);
                        ks.push(floor);
                        return Ok((ts, ks, Termination::HitFloor { t_stop }));
                    }
                    t = if cfg.horizon - (t + h) <= 1e-12 * cfg.horizon { cfg.horizon } else { t + h };
                    k = next;
                    ts.push(t);
                    ks.push(k);
                }
                let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
                h = (h * factor).min(h_max);
            }
        }
    }
    Ok((ts, ks, Termination::HorizonReached))
}

/// Path of `k̇ = f(k) − c(k)` under an arbitrary feedback consumption rule.
pub fn integrate_with_control<C>(model: &ModelSpec, control: C, k0: f64, cfg: &IntegratorConfig) -> Result<Trajectory>
where
    C: Fn(f64) -> Result<f64>,
{
    let rhs = |k: f64| Ok(model.production.eval(k)? - control(k)?);
    let (t, k, terminated) = integrate_autonomous(rhs, k0, cfg)?;
    let c = k.iter().map(|&x| control(x)).collect::<Result<Vec<_>>>()?;
    Trajectory::from_nodes(model, t, k, c, terminated)
}

/// Feedback consumption `(u')⁻¹(V'(k))` induced by a candidate. Undefined
/// when `u'` is not invertible (linear utility), even where the Hamiltonian's
/// maximizer is a corner.
pub fn policy(model: &ModelSpec, candidate: &CandidateValueFn, k: f64) -> Result<f64> {
    let p = candidate.deriv(k)?;
    if !model.utility.marginal_is_decreasing() {
        return Err(Error::PolicyUndefined { k, p });
    }
    match optimal_control(model, k, p)? {
        Control::Optimal(c) => Ok(c),
        Control::Degenerate => Err(Error::PolicyUndefined { k, p }),
    }
}

/// Closed-loop path `k̇ = f(k) − (u')⁻¹(V'(k))`.
pub fn integrate_policy(
    model: &ModelSpec,
    candidate: &CandidateValueFn,
    k0: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    integrate_with_control(model, |k| policy(model, candidate, k), k0, cfg)
}

/// Zero-consumption path `k̇ = f(k)`.
pub fn pure_accumulation(model: &ModelSpec, k0: f64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    integrate_with_control(model, |_| Ok(0.0), k0, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ProductionSpec, UtilitySpec};

    #[test]
    fn discounted_segment_matches_quadrature() {
        for &(rho, h, u0, u1) in
            &[(1.0, 1e-3, 1.0, 2.0), (0.5, 0.3, -1.0, 4.0), (2.0, 1.7, 0.0, 1.0), (1.0, 0.099, 3.0, 1.0)]
        {
            let n = 200_000;
            let dx = h / n as f64;
            // composite Simpson
            let g = |s: f64| (-rho * s).exp() * (u0 + (u1 - u0) * s / h);
            let mut acc = g(0.0) + g(h);
            for i in 1..n {
                acc += g(i as f64 * dx) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            let simpson = acc * dx / 3.0;
            assert!((discounted_segment(rho, h, u0, u1) - simpson).abs() < 1e-13, "{rho} {h}");
        }
    }

    #[test]
    fn constant_paths_are_exact() {
        let m = ModelSpec::prop2();
        let cfg = IntegratorConfig::rk4(1e-3, 30.0);
        let traj = integrate_with_control(&m, |_| Ok(1.0), 1.0, &cfg).unwrap();
        assert!(traj.k.iter().all(|&k| k == 1.0));
        let expected = 2.0 * -(-30f64).exp_m1();
        assert!((accumulated_payoff(&traj, 1.0).unwrap() - expected).abs() < 1e-13);
        let traj = integrate_with_control(&m, |_| Ok(0.25), 0.25, &cfg).unwrap();
        assert!((accumulated_payoff(&traj, 1.0).unwrap() - 0.75 * -(-30f64).exp_m1()).abs() < 1e-13);

        let sq =
            ModelSpec { rho: 1.0, utility: UtilitySpec::ScaledSqrt { a: 2.0 }, production: ProductionSpec::Sqrt {} };
        let traj = pure_accumulation(&sq, 1.0, &cfg).unwrap();
        assert_eq!(accumulated_payoff(&traj, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn minus_infinite_payoff() {
        let m = ModelSpec { rho: 1.0, utility: UtilitySpec::Crra { theta: 2.0 }, production: ProductionSpec::Sqrt {} };
        let traj = pure_accumulation(&m, 1.0, &IntegratorConfig::rk4(1e-2, 1.0)).unwrap();
        assert!(matches!(accumulated_payoff(&traj, 1.0), Err(Error::MinusInfinitePayoff { t }) if t == 0.0));
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("-inf"));
    }

    #[test]
    fn policy_examples() {
        let m = ModelSpec::prop2();
        let cfg = IntegratorConfig::for_model(&m);
        let traj = integrate_policy(&m, &CandidateValueFn::Prop2Singular, 1.0, &cfg).unwrap();
        assert!(traj.k.iter().all(|&k| (k - 1.0).abs() < 1e-12));
        assert!(traj.c.iter().all(|&c| (c - 1.0).abs() < 1e-12));
        assert_eq!(traj.terminated, Termination::HorizonReached);

        let traj = integrate_policy(&m, &CandidateValueFn::clairaut(2.0).unwrap(), 0.2, &cfg).unwrap();
        match traj.terminated {
            Termination::HitFloor { t_stop } => assert!((t_stop - 5f64.ln()).abs() < 1e-6, "{t_stop}"),
            other => panic!("{other:?}"),
        }
        assert_eq!(*traj.k.last().unwrap(), cfg.k_floor);

        let err =
            integrate_policy(&ModelSpec::prop1(1.0), &CandidateValueFn::prop1_family(2.0, 1.0).unwrap(), 1.0, &cfg);
        assert!(matches!(err, Err(Error::PolicyUndefined { .. })));
    }

    #[test]
    fn pure_accumulation_examples() {
        let cfg = IntegratorConfig::rk4(1e-3, 5.0);
        let traj = pure_accumulation(&ModelSpec::theorem2(), 1.0, &cfg).unwrap();
        for t in [0.0, 1.0, 2.0, 5.0] {
            let (k, _) = traj.at(t).unwrap();
            assert!((k - (1.0 + t / 2.0).powi(2)).abs() < 1e-9, "t={t}: {k}");
        }
        let lin =
            ModelSpec { rho: 1.0, utility: UtilitySpec::ScaledSqrt { a: 1.0 }, production: ProductionSpec::Linear {} };
        let traj = pure_accumulation(&lin, 1.0, &IntegratorConfig::rk4(1e-3, 1.0)).unwrap();
        assert!((traj.k.last().unwrap() - std::f64::consts::E).abs() < 1e-10);
    }

    #[test]
    fn rk45_agrees_with_closed_form() {
        let cfg = IntegratorConfig {
            method: Method::Rk45 { rtol: 1e-10, atol: 1e-12 },
            horizon: 5.0,
            k_floor: DEFAULT_K_FLOOR,
        };
        let traj = pure_accumulation(&ModelSpec::theorem2(), 1.0, &cfg).unwrap();
        assert_eq!(traj.end_time(), 5.0);
        for (t, k) in traj.t.iter().zip(&traj.k) {
            assert!((k - (1.0 + t / 2.0).powi(2)).abs() < 1e-8);
        }
        let traj = integrate_policy(
            &ModelSpec::prop2(),
            &CandidateValueFn::clairaut(2.0).unwrap(),
            0.2,
            &cfg.with_horizon(3.0),
        )
        .unwrap();
        match traj.terminated {
            Termination::HitFloor { t_stop } => assert!((t_stop - 5f64.ln()).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn interpolation_on_trajectory() {
        let traj = pure_accumulation(&ModelSpec::theorem2(), 1.0, &IntegratorConfig::rk4(0.5, 2.0)).unwrap();
        assert_eq!(traj.at(0.5).unwrap().0, traj.k[1]);
        assert!(traj.at(2.5).is_err());
    }
}
