use serde::{Deserialize, Serialize};

use super::SubdifferentialInterval;
use crate::{Error, Result};

/// Catalog of production functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProductionSpec {
    /// `f(k) = √k`
    Sqrt {},
    /// `f(k) = k`
    Linear {},
    /// Supporting line `g(k) = p₂(k − k₂) + f(k₂)` of a base technology.
    /// Used as a majorant; `g(0) = 0` is not required.
    AffineCapped { k2: f64, p2: f64, base: Box<ProductionSpec> },
    /// Concave piecewise-linear with `f(0) = 0`: `slopes[i]` applies between
    /// `breakpoints[i-1]` and `breakpoints[i]` (with `breakpoints[-1] = 0`).
    PiecewiseLinear { breakpoints: Vec<f64>, slopes: Vec<f64> },
}

fn check_k(k: f64, strict: bool) -> Result<()> {
    let ok = if strict { k > 0.0 } else { k >= 0.0 };
    if ok && k.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what: "k", value: k, domain: if strict { "(0, inf)" } else { "[0, inf)" } })
    }
}

impl ProductionSpec {
    /// `min(k, 0.5k + 1)`, the kinked example technology.
    pub fn kinked_example() -> Self {
        ProductionSpec::PiecewiseLinear { breakpoints: vec![2.0], slopes: vec![1.0, 0.5] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProductionSpec::Sqrt {} | ProductionSpec::Linear {} => Ok(()),
            ProductionSpec::AffineCapped { k2, p2, base } => {
                base.validate()?;
                if !(*k2 > 0.0 && k2.is_finite() && *p2 > 0.0 && p2.is_finite()) {
                    return Err(Error::InvalidModel(format!(
                        "affine_capped needs k2 > 0 and p2 > 0, got k2={k2}, p2={p2}"
                    )));
                }
                if !base.subdifferential(*k2)?.contains(*p2) {
                    return Err(Error::InvalidModel(format!(
                        "affine_capped: p2={p2} is not a supergradient of the base at k2={k2}"
                    )));
                }
                Ok(())
            }
            ProductionSpec::PiecewiseLinear { breakpoints, slopes } => {
                if slopes.len() != breakpoints.len() + 1 {
                    return Err(Error::InvalidModel(format!(
                        "piecewise_linear needs one more slope than breakpoints ({} vs {})",
                        slopes.len(),
                        breakpoints.len()
                    )));
                }
                if breakpoints.iter().any(|b| !(*b > 0.0 && b.is_finite()))
                    || breakpoints.windows(2).any(|w| w[1] <= w[0])
                {
                    return Err(Error::InvalidModel(
                        "piecewise_linear breakpoints must be positive and strictly increasing".into(),
                    ));
                }
                if slopes.iter().any(|s| !s.is_finite()) || slopes.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(Error::InvalidModel("piecewise_linear slopes must be strictly decreasing".into()));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, k: f64) -> Result<f64> {
        check_k(k, false)?;
        Ok(match self {
            ProductionSpec::Sqrt {} => k.sqrt(),
            ProductionSpec::Linear {} => k,
            ProductionSpec::AffineCapped { k2, p2, base } => p2 * (k - k2) + base.eval(*k2)?,
            ProductionSpec::PiecewiseLinear { breakpoints, slopes } => {
                let mut value = 0.0;
                let mut left = 0.0;
                for (i, &b) in breakpoints.iter().enumerate() {
                    if k <= b {
                        return Ok(value + slopes[i] * (k - left));
                    }
                    value += slopes[i] * (b - left);
                    left = b;
                }
                value + slopes[slopes.len() - 1] * (k - left)
            }
        })
    }

    /// `∂f(k) = [D₊f(k), D₋f(k)]`, exact for every catalog member.
    pub fn subdifferential(&self, k: f64) -> Result<SubdifferentialInterval> {
        check_k(k, true)?;
        Ok(match self {
            ProductionSpec::Sqrt {} => SubdifferentialInterval::point(0.5 / k.sqrt()),
            ProductionSpec::Linear {} => SubdifferentialInterval::point(1.0),
            ProductionSpec::AffineCapped { p2, .. } => SubdifferentialInterval::point(*p2),
            ProductionSpec::PiecewiseLinear { breakpoints, slopes } => {
                let i = breakpoints.partition_point(|&b| b < k);
                if i < breakpoints.len() && breakpoints[i] == k {
                    SubdifferentialInterval { lower: slopes[i + 1], upper: slopes[i] }
                } else {
                    SubdifferentialInterval::point(slopes[i])
                }
            }
        })
    }

    /// `f'(k)` where it exists; `None` at kinks.
    pub fn derivative(&self, k: f64) -> Result<Option<f64>> {
        let s = self.subdifferential(k)?;
        Ok(s.is_point().then_some(s.lower))
    }

    /// `f''(k)`; piecewise-linear members report the (zero) one-sided value
    /// at kinks.
    pub fn curvature(&self, k: f64) -> Result<f64> {
        check_k(k, true)?;
        Ok(match self {
            ProductionSpec::Sqrt {} => -0.25 * k.powf(-1.5),
            _ => 0.0,
        })
    }

    /// Points where `f` is not differentiable.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            ProductionSpec::PiecewiseLinear { breakpoints, .. } => breakpoints.clone(),
            _ => vec![],
        }
    }

    /// Whether `f(0) = 0` holds, as Assumption F requires.
    pub fn vanishes_at_zero(&self) -> bool {
        self.eval(0.0).map(|v| v == 0.0).unwrap_or(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{logspace, max_chord_violation};

    fn catalog() -> Vec<ProductionSpec> {
        vec![
            ProductionSpec::Sqrt {},
            ProductionSpec::Linear {},
            ProductionSpec::AffineCapped { k2: 1.0, p2: 0.5, base: Box::new(ProductionSpec::Sqrt {}) },
            ProductionSpec::kinked_example(),
            ProductionSpec::PiecewiseLinear { breakpoints: vec![0.5, 1.0, 3.0], slopes: vec![2.0, 1.0, 0.3, 0.0] },
        ]
    }

    #[test]
    fn eval_examples() {
        assert_eq!(ProductionSpec::Sqrt {}.eval(4.0).unwrap(), 2.0);
        assert_eq!(ProductionSpec::Linear {}.eval(3.0).unwrap(), 3.0);
        let g = ProductionSpec::AffineCapped { k2: 1.0, p2: 0.5, base: Box::new(ProductionSpec::Sqrt {}) };
        assert_eq!(g.eval(0.0).unwrap(), 0.5);
        assert!(!g.vanishes_at_zero());
        let kinked = ProductionSpec::kinked_example();
        assert_eq!(kinked.eval(1.0).unwrap(), 1.0);
        assert_eq!(kinked.eval(4.0).unwrap(), 3.0);
        assert!(ProductionSpec::Sqrt {}.eval(-1e-12).is_err());
    }

    #[test]
    fn subdifferential_examples() {
        assert_eq!(
            ProductionSpec::Sqrt {}.subdifferential(4.0).unwrap(),
            SubdifferentialInterval { lower: 0.25, upper: 0.25 }
        );
        assert_eq!(
            ProductionSpec::kinked_example().subdifferential(2.0).unwrap(),
            SubdifferentialInterval { lower: 0.5, upper: 1.0 }
        );
        assert_eq!(
            ProductionSpec::Linear {}.subdifferential(1.0).unwrap(),
            SubdifferentialInterval { lower: 1.0, upper: 1.0 }
        );
        assert!(ProductionSpec::Sqrt {}.subdifferential(0.0).is_err());
        assert_eq!(ProductionSpec::kinked_example().derivative(2.0).unwrap(), None);
    }

    #[test]
    fn validation() {
        for f in catalog() {
            f.validate().unwrap();
        }
        let bad = ProductionSpec::PiecewiseLinear { breakpoints: vec![1.0], slopes: vec![0.5, 1.0] };
        assert!(bad.validate().is_err());
        let off = ProductionSpec::AffineCapped { k2: 1.0, p2: 0.9, base: Box::new(ProductionSpec::Sqrt {}) };
        assert!(off.validate().is_err());
    }

    #[test]
    fn concave_and_ordered_subdifferentials() {
        let mut grid = logspace(1e-3, 50.0, 300);
        grid.extend([0.5, 1.0, 2.0, 3.0]);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        for f in catalog() {
            let ys: Vec<f64> = grid.iter().map(|&k| f.eval(k).unwrap()).collect();
            assert!(max_chord_violation(&grid, &ys).0 <= 1e-12, "{f:?}");
            for &k in &grid {
                let s = f.subdifferential(k).unwrap();
                assert!(s.lower <= s.upper);
                if !f.kinks().contains(&k) {
                    assert_eq!(s.lower, s.upper);
                }
            }
        }
    }
}
