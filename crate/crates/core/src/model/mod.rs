//! Model specifications `(ρ, u, f)`, the function catalog, steady states and
//! the assumption audit.

mod audit;
mod production;
mod utility;

use serde::{Deserialize, Serialize};

pub use audit::{audit_assumptions, AuditCheck, AuditReport, Condition, Thm2Witness};
pub use production::ProductionSpec;
pub use utility::UtilitySpec;

use crate::{Error, Result};

/// `∂G(x) = [D₊G(x), D₋G(x)]` of a concave function; a point where `G` is
/// differentiable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubdifferentialInterval {
    pub lower: f64,
    pub upper: f64,
}

impl SubdifferentialInterval {
    pub fn point(x: f64) -> Self {
        Self { lower: x, upper: x }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }
}

/// The triple defining the growth problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub rho: f64,
    pub utility: UtilitySpec,
    pub production: ProductionSpec,
}

impl ModelSpec {
    pub fn new(rho: f64, utility: UtilitySpec, production: ProductionSpec) -> Result<Self> {
        let m = Self { rho, utility, production };
        m.validate()?;
        Ok(m)
    }

    /// `u(c) = c`, `f(k) = √k`: classical solutions exist, none is the value function.
    pub fn prop1(rho: f64) -> Self {
        Self { rho, utility: UtilitySpec::Linear {}, production: ProductionSpec::Sqrt {} }
    }

    /// `ρ = 1`, `u(c) = c + √c`, `f(k) = k`: the value function `k + √k` is one of
    /// infinitely many classical solutions.
    pub fn prop2() -> Self {
        Self { rho: 1.0, utility: UtilitySpec::SqrtShift {}, production: ProductionSpec::Linear {} }
    }

    /// `ρ = 1`, `u(c) = 2√c`, `f(k) = √k`: every sufficient condition holds.
    pub fn theorem2() -> Self {
        Self { rho: 1.0, utility: UtilitySpec::ScaledSqrt { a: 2.0 }, production: ProductionSpec::Sqrt {} }
    }

    /// Named presets accepted by the command line: `prop1`, `prop2`, `theorem2`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "prop1" => Some(Self::prop1(1.0)),
            "prop2" => Some(Self::prop2()),
            "theorem2" | "theorem2-demo" => Some(Self::theorem2()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidModel(format!("rho must be positive, got {}", self.rho)));
        }
        self.utility.validate()?;
        self.production.validate()
    }

    /// Parses and validates the JSON document
    /// `{"rho": .., "utility": {"kind": .., "params": {..}}, "production": {..}}`.
    /// Errors carry the path of the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let model: ModelSpec = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Parse { path: e.path().to_string(), message: e.inner().to_string() })?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model specs always serialize")
    }
}

/// Bisection tolerance in `k` for [`find_steady_state`].
pub const STEADY_STATE_TOL: f64 = 1e-10;

/// Locates `k*` with `ρ ∈ ∂f(k*)` inside `[k1, k2]`.
///
/// Requires `D₊f(k1) > ρ` and some `p₂ ∈ ∂f(k2)` below `ρ`; the map
/// `k ↦ ∂f(k)` is monotone so bisection applies. Kinks are tested first so
/// piecewise-linear technologies return an exact breakpoint.
pub fn find_steady_state(model: &ModelSpec, k1: f64, k2: f64) -> Result<f64> {
    if !(k1 > 0.0 && k2 > k1 && k2.is_finite()) {
        return Err(Error::Config(format!("search interval [{k1}, {k2}] must satisfy 0 < k1 < k2")));
    }
    let f = &model.production;
    let rho = model.rho;
    let s1 = f.subdifferential(k1)?;
    let s2 = f.subdifferential(k2)?;
    if s1.contains(rho) && s2.contains(rho) {
        return Err(Error::NotIsolated { lo: k1, hi: k2 });
    }
    if !(s1.lower > rho) {
        return Err(Error::ConditionFailed {
            condition: Condition::Thm2II.to_string(),
            detail: format!("D+f(k1) = {} is not above rho = {rho} at k1 = {k1}", s1.lower),
        });
    }
    if !(s2.lower < rho) {
        return Err(Error::ConditionFailed {
            condition: Condition::Thm2II.to_string(),
            detail: format!("no p2 in [{}, {}] = df(k2) lies below rho = {rho} at k2 = {k2}", s2.lower, s2.upper),
        });
    }

    let mut found = None;
    for kink in f.kinks().into_iter().filter(|&b| b > k1 && b < k2) {
        if f.subdifferential(kink)?.contains(rho) {
            found = Some(kink);
            break;
        }
    }
    let k_star = match found {
        Some(k) => k,
        None => {
            let (mut lo, mut hi) = (k1, k2);
            let mut exact = None;
            while hi - lo > STEADY_STATE_TOL {
                let mid = 0.5 * (lo + hi);
                let s = f.subdifferential(mid)?;
                if s.contains(rho) {
                    exact = Some(mid);
                    break;
                }
                if s.lower > rho {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            exact.unwrap_or(0.5 * (lo + hi))
        }
    };

    let delta = 1e-6 * k_star.max(1e-3);
    if f.subdifferential(k_star - delta)?.contains(rho) || f.subdifferential(k_star + delta)?.contains(rho) {
        return Err(Error::NotIsolated { lo: k_star - delta, hi: k_star + delta });
    }
    Ok(k_star)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steady_state_examples() {
        let k = find_steady_state(&ModelSpec::prop1(1.0), 0.01, 4.0).unwrap();
        assert!((k - 0.25).abs() <= 1e-10);
        let s = ProductionSpec::Sqrt {}.subdifferential(k).unwrap();
        assert!((s.lower - 1.0).abs() <= 1e-10);

        let kinked = ModelSpec {
            rho: 0.75,
            utility: UtilitySpec::ScaledSqrt { a: 1.0 },
            production: ProductionSpec::kinked_example(),
        };
        let k = find_steady_state(&kinked, 0.1, 10.0).unwrap();
        assert_eq!(k, 2.0);
        assert!(kinked.production.subdifferential(k).unwrap().contains(0.75));

        let linear =
            ModelSpec { rho: 1.0, utility: UtilitySpec::ScaledSqrt { a: 1.0 }, production: ProductionSpec::Linear {} };
        assert!(matches!(find_steady_state(&linear, 0.01, 4.0), Err(Error::NotIsolated { .. })));
    }

    #[test]
    fn steady_state_on_flat_segment_is_not_isolated() {
        let f = ProductionSpec::PiecewiseLinear { breakpoints: vec![1.0, 3.0], slopes: vec![2.0, 1.0, 0.5] };
        let m = ModelSpec { rho: 1.0, utility: UtilitySpec::Linear {}, production: f };
        assert!(matches!(find_steady_state(&m, 0.5, 5.0), Err(Error::NotIsolated { .. })));
    }

    #[test]
    fn steady_state_condition_failures() {
        let m = ModelSpec::theorem2();
        match find_steady_state(&m, 1.0, 4.0) {
            Err(Error::ConditionFailed { detail, .. }) => assert!(detail.contains("D+f(k1)")),
            other => panic!("{other:?}"),
        }
        match find_steady_state(&m, 0.01, 0.1) {
            Err(Error::ConditionFailed { detail, .. }) => assert!(detail.contains("p2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_round_trip_and_errors() {
        let text = r#"{"rho": 1.0, "utility": {"kind": "scaled_sqrt", "params": {"a": 2.0}},
                       "production": {"kind": "sqrt", "params": {}}}"#;
        let m = ModelSpec::from_json(text).unwrap();
        assert_eq!(m, ModelSpec::theorem2());
        assert_eq!(ModelSpec::from_json(&m.to_json()).unwrap(), m);

        let nested = ModelSpec {
            rho: 0.5,
            utility: UtilitySpec::Crra { theta: 2.0 },
            production: ProductionSpec::AffineCapped { k2: 1.0, p2: 0.5, base: Box::new(ProductionSpec::Sqrt {}) },
        };
        assert_eq!(ModelSpec::from_json(&nested.to_json()).unwrap(), nested);

        let bad = r#"{"rho": 1.0, "utility": {"kind": "cobb_douglas", "params": {}},
                      "production": {"kind": "sqrt", "params": {}}}"#;
        match ModelSpec::from_json(bad) {
            Err(Error::Parse { path, .. }) => assert!(path.starts_with("utility"), "{path}"),
            other => panic!("{other:?}"),
        }
        let bad = r#"{"rho": 1.0, "utility": {"kind": "crra", "params": {"theta": "x"}},
                      "production": {"kind": "sqrt", "params": {}}}"#;
        match ModelSpec::from_json(bad) {
            Err(Error::Parse { path, .. }) => assert!(path.contains("theta"), "{path}"),
            other => panic!("{other:?}"),
        }
        let negative = r#"{"rho": -1.0, "utility": {"kind": "linear", "params": {}},
                           "production": {"kind": "sqrt", "params": {}}}"#;
        assert!(matches!(ModelSpec::from_json(negative), Err(Error::InvalidModel(_))));
    }
}
