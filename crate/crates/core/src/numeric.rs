//! Small numerical helpers shared by the modules: grids, bracketed root
//! finding, golden-section search, chord tests.

use crate::{Error, Result};

/// `n` equally spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let h = (hi - lo) / (n - 1) as f64;
            let mut v: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
            v[n - 1] = hi;
            v
        }
    }
}

/// `n` log-spaced points on `[lo, hi]`, `lo > 0`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let mut v: Vec<f64> = linspace(a, b, n).into_iter().map(f64::exp).collect();
    if n > 1 {
        v[0] = lo;
        v[n - 1] = hi;
    }
    v
}

/// Strictly increasing, finite, positive.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("grid is empty".into()));
    }
    if grid.iter().any(|k| !k.is_finite() || *k <= 0.0) {
        return Err(Error::Config("grid points must be finite and positive".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Bisection for a sign change of `g` on `[lo, hi]`; runs until the bracket
/// stops shrinking in floating point or `width <= xtol`.
pub fn bisect<G>(mut g: G, mut lo: f64, mut hi: f64, xtol: f64) -> Option<f64>
where
    G: FnMut(f64) -> f64,
{
    let mut glo = g(lo);
    let ghi = g(hi);
    if glo == 0.0 {
        return Some(lo);
    }
    if ghi == 0.0 {
        return Some(hi);
    }
    if glo.signum() == ghi.signum() || glo.is_nan() || ghi.is_nan() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= xtol {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Some(mid);
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimizer of a unimodal (e.g. convex) function on `[a, b]` by golden-section
/// search, compared against both endpoints. Returns `(argmin, min)`.
pub fn golden_section_min<G, T>(mut g: G, a: f64, b: f64, iters: usize) -> (f64, T)
where
    G: FnMut(f64) -> T,
    T: PartialOrd + Copy,
{
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut g1 = g(x1);
    let mut g2 = g(x2);
    for _ in 0..iters {
        if hi - lo <= f64::EPSILON * (lo.abs() + hi.abs()) {
            break;
        }
        if g1 <= g2 {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - INV_PHI * (hi - lo);
            g1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + INV_PHI * (hi - lo);
            g2 = g(x2);
        }
    }
    let mut best = if g1 <= g2 { (x1, g1) } else { (x2, g2) };
    for x in [a, b] {
        let gx = g(x);
        if gx < best.1 {
            best = (x, gx);
        }
    }
    best
}

/// Largest violation of the concavity chord inequality
/// `G(y) >= G(x) + (G(z) − G(x))(y − x)/(z − x)` over consecutive triples.
/// Zero (or negative) means the sampled values are concave.
pub fn max_chord_violation(xs: &[f64], ys: &[f64]) -> (f64, usize) {
    let mut worst = (f64::NEG_INFINITY, 0);
    for i in 1..xs.len().saturating_sub(1) {
        let (x, y, z) = (xs[i - 1], xs[i], xs[i + 1]);
        let chord = ys[i - 1] + (ys[i + 1] - ys[i - 1]) * (y - x) / (z - x);
        let v = chord - ys[i];
        if v > worst.0 {
            worst = (v, i);
        }
    }
    worst
}

/// Richardson-extrapolated difference quotient. `dir = +1.0` gives the right
/// derivative, `-1.0` the left, `0.0` the central derivative.
pub fn richardson_derivative<G>(g: G, x: f64, h0: f64, dir: f64) -> Result<f64>
where
    G: Fn(f64) -> Result<f64>,
{
    const LEVELS: usize = 6;
    let gx = g(x)?;
    let quotient = |h: f64| -> Result<f64> {
        if dir == 0.0 {
            Ok((g(x + h)? - g(x - h)?) / (2.0 * h))
        } else {
            Ok((g(x + dir * h)? - gx) / (dir * h))
        }
    };
    // central differences have an even error expansion
    let order_step = if dir == 0.0 { 2 } else { 1 };
    let mut table = vec![vec![0.0; LEVELS]; LEVELS];
    let mut h = h0;
    for i in 0..LEVELS {
        table[i][0] = quotient(h)?;
        for j in 1..=i {
            let factor = 2f64.powi((order_step * j) as i32);
            table[i][j] = table[i][j - 1] + (table[i][j - 1] - table[i - 1][j - 1]) / (factor - 1.0);
        }
        h *= 0.5;
    }
    Ok(table[LEVELS - 1][LEVELS - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_hit_endpoints() {
        let g = logspace(0.1, 10.0, 200);
        assert_eq!(g.len(), 200);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[199], 10.0);
        assert!(validate_grid(&g).is_ok());
        assert!(validate_grid(&[1.0, 1.0]).is_err());
        assert!(validate_grid(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 0.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
        assert!(bisect(|x| x * x + 1.0, 0.0, 2.0, 0.0).is_none());
    }

    #[test]
    fn golden_section_interior_and_endpoint() {
        let (x, v) = golden_section_min(|p: f64| p + 1.0 / (4.0 * (p - 1.0)), 1.25, 2.0, 200);
        assert!((x - 1.5).abs() < 1e-7);
        assert!((v - 2.0).abs() < 1e-12);
        let (x, _) = golden_section_min(|p: f64| p, 1.0, 2.0, 200);
        assert_eq!(x, 1.0);
    }

    #[test]
    fn richardson_matches_exp() {
        let d = richardson_derivative(|x| Ok(x.exp()), 0.3, 1e-2, 0.0).unwrap();
        assert!((d - 0.3f64.exp()).abs() < 1e-12);
        let d = richardson_derivative(|x| Ok(x.exp()), 0.3, 1e-2, 1.0).unwrap();
        assert!((d - 0.3f64.exp()).abs() < 1e-9);
    }
}
