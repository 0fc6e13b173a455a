use std::fmt;

use serde::Serialize;

use super::ModelSpec;
use crate::numeric::{logspace, max_chord_violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    R,
    U,
    F,
    #[serde(rename = "Thm2(i)")]
    Thm2I,
    #[serde(rename = "Thm2(ii)")]
    Thm2II,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::R => "R",
            Condition::U => "U",
            Condition::F => "F",
            Condition::Thm2I => "Thm2(i)",
            Condition::Thm2II => "Thm2(ii)",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditCheck {
    pub condition: Condition,
    pub passed: bool,
    pub detail: String,
}

/// `D₊f(k1) > ρ > p2 > 0` with `p2 ∈ ∂f(k2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thm2Witness {
    pub k1: f64,
    pub k2: f64,
    pub p2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
    pub marginal_range: String,
    pub witness: Option<Thm2Witness>,
}

impl AuditReport {
    pub fn passed(&self, condition: Condition) -> bool {
        self.checks.iter().any(|c| c.condition == condition && c.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, condition: Condition) -> &AuditCheck {
        self.checks.iter().find(|c| c.condition == condition).expect("every condition is audited")
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{}: {} ({})", c.condition, if c.passed { "PASS" } else { "FAIL" }, c.detail)?;
        }
        Ok(())
    }
}

// probe points for the Thm2(ii) witnesses, nearest-to-one first
const K1_PROBES: [f64; 6] = [0.01, 1e-3, 1e-4, 1e-6, 1e-8, 1e-10];
const K2_PROBES: [f64; 6] = [4.0, 16.0, 100.0, 1e4, 1e6, 1e8];

/// Per-condition pass/fail with witnesses for R, U, F and the two extra
/// requirements of the sufficiency theorem.
pub fn audit_assumptions(model: &ModelSpec) -> AuditReport {
    let rho = model.rho;
    let mut checks = Vec::with_capacity(5);

    checks.push(AuditCheck {
        condition: Condition::R,
        passed: rho > 0.0 && rho.is_finite(),
        detail: format!("rho = {rho}"),
    });

    let u = &model.utility;
    let grid = logspace(1e-6, 1e4, 400);
    let u_check = u.validate().and_then(|_| {
        let ys = grid.iter().map(|&c| u.eval(c).map(|v| v.to_f64())).collect::<crate::Result<Vec<_>>>()?;
        let scale = ys.iter().fold(1.0f64, |m, y| m.max(y.abs()));
        let concave = max_chord_violation(&grid, &ys).0 <= 1e-9 * scale;
        let increasing = ys.windows(2).all(|w| w[1] > w[0]);
        Ok((concave, increasing))
    });
    checks.push(match u_check {
        Ok((true, true)) => {
            AuditCheck { condition: Condition::U, passed: true, detail: "concave and increasing on sample grid".into() }
        }
        Ok((concave, increasing)) => AuditCheck {
            condition: Condition::U,
            passed: false,
            detail: format!("concave: {concave}, increasing: {increasing}"),
        },
        Err(e) => AuditCheck { condition: Condition::U, passed: false, detail: e.to_string() },
    });

    let f = &model.production;
    let f_detail = match f.validate() {
        Err(e) => Err(e.to_string()),
        Ok(()) if !f.vanishes_at_zero() => Err(format!("f(0) = {} != 0", f.eval(0.0).unwrap_or(f64::NAN))),
        Ok(()) => {
            let mut kgrid = logspace(1e-6, 1e4, 400);
            kgrid.extend(f.kinks());
            kgrid.sort_by(f64::total_cmp);
            kgrid.dedup();
            let ys: Vec<f64> = kgrid.iter().map(|&k| f.eval(k).unwrap_or(f64::NAN)).collect();
            let scale = ys.iter().fold(1.0f64, |m, y| m.max(y.abs()));
            if max_chord_violation(&kgrid, &ys).0 <= 1e-12 * scale {
                Ok("concave with f(0) = 0".to_string())
            } else {
                Err("chord test failed".to_string())
            }
        }
    };
    checks.push(match f_detail {
        Ok(d) => AuditCheck { condition: Condition::F, passed: true, detail: d },
        Err(d) => AuditCheck { condition: Condition::F, passed: false, detail: d },
    });

    let range = u.marginal_range();
    let thm2_i = if !u.marginal_is_decreasing() {
        AuditCheck { condition: Condition::Thm2I, passed: false, detail: format!("u' constant: range(u') = {range}") }
    } else if !range.is_positive_reals() {
        AuditCheck { condition: Condition::Thm2I, passed: false, detail: format!("range(u') = {range} != (0, inf)") }
    } else {
        AuditCheck { condition: Condition::Thm2I, passed: true, detail: format!("u' decreasing, range(u') = {range}") }
    };
    checks.push(thm2_i);

    let k1 = K1_PROBES.iter().copied().find(|&k| f.subdifferential(k).map(|s| s.lower > rho).unwrap_or(false));
    let k2p2 = K2_PROBES.iter().copied().find_map(|k| {
        let s = f.subdifferential(k).ok()?;
        if s.lower < rho && s.upper > 0.0 {
            let p2 = if s.lower > 0.0 { s.lower } else { 0.5 * s.upper.min(rho) };
            Some((k, p2))
        } else {
            None
        }
    });
    let witness = match (k1, k2p2) {
        (Some(k1), Some((k2, p2))) => Some(Thm2Witness { k1, k2, p2 }),
        _ => None,
    };
    checks.push(match (k1, k2p2) {
        (Some(k1), Some((k2, p2))) => AuditCheck {
            condition: Condition::Thm2II,
            passed: true,
            detail: format!("k1 = {k1}, k2 = {k2}, p2 = {p2}"),
        },
        (None, _) => AuditCheck {
            condition: Condition::Thm2II,
            passed: false,
            detail: format!("no k1 with D+f(k1) > rho = {rho}"),
        },
        (_, None) => AuditCheck {
            condition: Condition::Thm2II,
            passed: false,
            detail: format!("no p2 in df(k2) with 0 < p2 < rho = {rho}"),
        },
    });

    AuditReport { checks, marginal_range: range.to_string(), witness }
}
