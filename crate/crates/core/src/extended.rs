use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// A real number or one of the two infinities.
///
/// This is the codomain of the Hamiltonian (the consumption supremum can
/// diverge) and of utilities at zero consumption. NaN is never a value:
/// constructors reject it and `∞ − ∞` is an [`Error::Arithmetic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    NegInf,
    Finite(f64),
    PosInf,
}

use ExtendedReal::{Finite, NegInf, PosInf};

impl ExtendedReal {
    pub const ZERO: ExtendedReal = Finite(0.0);

    /// Maps `±∞` to the matching infinity; NaN is an error.
    pub fn from_f64(x: f64) -> Result<Self> {
        if x.is_nan() {
            Err(Error::Arithmetic("NaN is not an extended real"))
        } else if x == f64::INFINITY {
            Ok(PosInf)
        } else if x == f64::NEG_INFINITY {
            Ok(NegInf)
        } else {
            Ok(Finite(x))
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Finite(x) => Some(x),
            _ => None,
        }
    }

    /// Lossless view as an IEEE double (infinities included).
    pub fn to_f64(self) -> f64 {
        match self {
            NegInf => f64::NEG_INFINITY,
            Finite(x) => x,
            PosInf => f64::INFINITY,
        }
    }

    pub fn checked_add(self, rhs: ExtendedReal) -> Result<ExtendedReal> {
        match (self, rhs) {
            (Finite(a), Finite(b)) => ExtendedReal::from_f64(a + b),
            (PosInf, NegInf) | (NegInf, PosInf) => Err(Error::Arithmetic("inf - inf is undefined")),
            (PosInf, _) | (_, PosInf) => Ok(PosInf),
            (NegInf, _) | (_, NegInf) => Ok(NegInf),
        }
    }

    pub fn checked_sub(self, rhs: ExtendedReal) -> Result<ExtendedReal> {
        self.checked_add(-rhs)
    }

    /// Multiplication by a finite real. `0 · ±∞` is an error.
    pub fn checked_scale(self, s: f64) -> Result<ExtendedReal> {
        if s.is_nan() || s.is_infinite() {
            return Err(Error::Arithmetic("scale factor must be finite"));
        }
        match self {
            Finite(x) => ExtendedReal::from_f64(x * s),
            _ if s == 0.0 => Err(Error::Arithmetic("0 * inf is undefined")),
            inf if s > 0.0 => Ok(inf),
            inf => Ok(-inf),
        }
    }

    pub fn abs(self) -> ExtendedReal {
        match self {
            Finite(x) => Finite(x.abs()),
            _ => PosInf,
        }
    }
}

impl From<f64> for ExtendedReal {
    /// Panics on NaN; use [`ExtendedReal::from_f64`] for untrusted input.
    fn from(x: f64) -> Self {
        ExtendedReal::from_f64(x).expect("NaN is not an extended real")
    }
}

impl std::ops::Neg for ExtendedReal {
    type Output = ExtendedReal;
    fn neg(self) -> ExtendedReal {
        match self {
            NegInf => PosInf,
            Finite(x) => Finite(-x),
            PosInf => NegInf,
        }
    }
}

impl Eq for ExtendedReal {}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtendedReal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.to_f64().total_cmp(&other.to_f64())
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NegInf => f.write_str("-inf"),
            PosInf => f.write_str("+inf"),
            Finite(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for ExtendedReal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+inf" | "inf" => Ok(PosInf),
            "-inf" => Ok(NegInf),
            other => {
                let x: f64 = other.parse().map_err(|_| Error::Parse {
                    path: "extended real".into(),
                    message: format!("`{other}` is not a number or +inf/-inf"),
                })?;
                ExtendedReal::from_f64(x)
            }
        }
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Finite(x) => s.serialize_f64(*x),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => ExtendedReal::from_f64(x).map_err(serde::de::Error::custom),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinity_absorbs_finite() {
        assert_eq!(Finite(3.0).checked_add(PosInf).unwrap(), PosInf);
        assert_eq!(NegInf.checked_add(Finite(-1e300)).unwrap(), NegInf);
        assert_eq!(Finite(1.0).checked_sub(NegInf).unwrap(), PosInf);
    }

    #[test]
    fn opposite_infinities_are_an_error() {
        assert!(PosInf.checked_add(NegInf).is_err());
        assert!(PosInf.checked_sub(PosInf).is_err());
        assert!(PosInf.checked_scale(0.0).is_err());
    }

    #[test]
    fn ordering_is_total() {
        let mut v = vec![PosInf, Finite(1.0), NegInf, Finite(-2.0)];
        v.sort();
        assert_eq!(v, vec![NegInf, Finite(-2.0), Finite(1.0), PosInf]);
        assert!(Finite(f64::MAX) < PosInf);
    }

    #[test]
    fn nan_rejected() {
        assert!(ExtendedReal::from_f64(f64::NAN).is_err());
        assert!(Finite(f64::MAX).checked_scale(-1.0).unwrap() == Finite(-f64::MAX));
    }

    #[test]
    fn text_round_trip() {
        for v in [PosInf, NegInf, Finite(0.125)] {
            assert_eq!(v.to_string().parse::<ExtendedReal>().unwrap(), v);
            let json = serde_json::to_string(&v).unwrap();
            assert_eq!(serde_json::from_str::<ExtendedReal>(&json).unwrap(), v);
        }
    }
}
