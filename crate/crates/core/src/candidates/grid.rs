use std::io::{Read, Write};

use serde::Serialize;

use crate::numeric::validate_grid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Interp {
    /// C¹ cubic through values and slopes.
    Hermite,
    /// Broken line; interior knots are kinks with one-sided secant slopes.
    Linear,
}

/// Interpolant through `(k_i, V_i, V'_i)`, cubic Hermite by default.
///
/// Derivatives come from the interpolant itself, never from re-differencing.
/// [`GridFn::monotone`] builds the Fritsch–Carlson slopes when only values
/// are known, which preserves monotonicity of the data. [`GridFn::linear`]
/// keeps concave data concave.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    interp: Interp,
}

impl GridFn {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        validate_grid(&knots)?;
        if knots.len() < 2 || values.len() != knots.len() || slopes.len() != knots.len() {
            return Err(Error::Config(format!(
                "grid function needs >= 2 knots with matching values/slopes ({} / {} / {})",
                knots.len(),
                values.len(),
                slopes.len()
            )));
        }
        if values.iter().chain(&slopes).any(|x| !x.is_finite()) {
            return Err(Error::Config("grid function values and slopes must be finite".into()));
        }
        Ok(Self { knots, values, slopes, interp: Interp::Hermite })
    }

    /// Piecewise-linear interpolant; the stored slope at each knot is the
    /// secant to its right (to its left at the last knot).
    pub fn linear(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_grid(&knots)?;
        let n = knots.len();
        if n < 2 || values.len() != n {
            return Err(Error::Config("linear interpolant needs >= 2 knots with matching values".into()));
        }
        let mut slopes: Vec<f64> =
            (0..n - 1).map(|i| (values[i + 1] - values[i]) / (knots[i + 1] - knots[i])).collect();
        slopes.push(slopes[n - 2]);
        let mut g = Self::new(knots, values, slopes)?;
        g.interp = Interp::Linear;
        Ok(g)
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    /// Monotone cubic (Fritsch–Carlson) interpolant of the data.
    pub fn monotone(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_grid(&knots)?;
        let n = knots.len();
        if n < 2 || values.len() != n {
            return Err(Error::Config("monotone interpolant needs >= 2 knots with matching values".into()));
        }
        let secants: Vec<f64> = (0..n - 1).map(|i| (values[i + 1] - values[i]) / (knots[i + 1] - knots[i])).collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            let (d0, d1) = (secants[i - 1], secants[i]);
            if d0 * d1 <= 0.0 {
                slopes[i] = 0.0;
            } else {
                // weighted harmonic mean (Fritsch–Butland)
                let (h0, h1) = (knots[i] - knots[i - 1], knots[i + 1] - knots[i]);
                let (w0, w1) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                slopes[i] = (w0 + w1) / (w0 / d0 + w1 / d1);
            }
        }
        Self::new(knots, values, slopes)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    fn locate(&self, k: f64) -> Result<usize> {
        let (lo, hi) = self.domain();
        if !(k >= lo && k <= hi) {
            return Err(Error::OutOfDomain { k, lo, hi });
        }
        let i = self.knots.partition_point(|&x| x <= k);
        Ok(i.saturating_sub(1).min(self.knots.len() - 2))
    }

    pub fn eval(&self, k: f64) -> Result<f64> {
        let i = self.locate(k)?;
        let h = self.knots[i + 1] - self.knots[i];
        let t = (k - self.knots[i]) / h;
        if self.interp == Interp::Linear {
            return Ok(if t == 1.0 {
                self.values[i + 1]
            } else {
                self.values[i] + t * (self.values[i + 1] - self.values[i])
            });
        }
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok(h00 * self.values[i] + h10 * h * self.slopes[i] + h01 * self.values[i + 1] + h11 * h * self.slopes[i + 1])
    }

    pub fn deriv(&self, k: f64) -> Result<f64> {
        let i = self.locate(k)?;
        if self.interp == Interp::Linear {
            let (d_plus, d_minus) = self.one_sided(k)?;
            if d_plus != d_minus {
                return Err(Error::KinkDerivative { k });
            }
            return Ok(d_plus);
        }
        if k == self.knots[i] {
            return Ok(self.slopes[i]);
        }
        if k == self.knots[i + 1] {
            return Ok(self.slopes[i + 1]);
        }
        let h = self.knots[i + 1] - self.knots[i];
        let t = (k - self.knots[i]) / h;
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        Ok(d00 * self.values[i] + d10 * self.slopes[i] + d01 * self.values[i + 1] + d11 * self.slopes[i + 1])
    }

    /// `(D₊, D₋)`; they differ only at interior knots of a linear grid. At
    /// the ends of the domain the one available side is returned twice.
    pub fn one_sided(&self, k: f64) -> Result<(f64, f64)> {
        let i = self.locate(k)?;
        if self.interp == Interp::Hermite {
            let d = self.deriv(k)?;
            return Ok((d, d));
        }
        let n = self.knots.len();
        let secant = |j: usize| self.slopes[j.min(n - 2)];
        if k == self.knots[i] && i > 0 {
            Ok((secant(i), secant(i - 1)))
        } else if k == self.knots[i + 1] && i + 1 < n - 1 {
            Ok((secant(i + 1), secant(i)))
        } else {
            Ok((secant(i), secant(i)))
        }
    }

    /// Columns `k, V, Vprime`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "V", "Vprime"])?;
        for i in 0..self.knots.len() {
            w.write_record([self.knots[i].to_string(), self.values[i].to_string(), self.slopes[i].to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `k, V, Vprime` (header required). A file without the `Vprime`
    /// column gets monotone-cubic slopes.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h.trim() == name);
        let (ki, vi) = match (col("k"), col("V")) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Parse { path: "header".into(), message: "expected columns k, V[, Vprime]".into() }),
        };
        let di = col("Vprime");
        let (mut knots, mut values, mut slopes) = (vec![], vec![], vec![]);
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let num = |i: usize, name: &str| -> Result<f64> {
                rec.get(i).and_then(|s| s.trim().parse().ok()).ok_or_else(|| Error::Parse {
                    path: format!("row {}.{name}", line + 1),
                    message: "not a number".into(),
                })
            };
            knots.push(num(ki, "k")?);
            values.push(num(vi, "V")?);
            if let Some(di) = di {
                slopes.push(num(di, "Vprime")?);
            }
        }
        if di.is_some() {
            Self::new(knots, values, slopes)
        } else {
            Self::monotone(knots, values)
        }
    }
}
