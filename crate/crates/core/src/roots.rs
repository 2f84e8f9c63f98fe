//! Scalar root finding and maximization used across the crate.

use crate::error::{Error, Result};

pub const MAX_ITER: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-10;

/// Solve `f(t) = target` for a nondecreasing `f` with `f(0) = 0`.
///
/// The bracket is grown geometrically from `start` until it straddles the
/// target, then bisected. Evaluations returning `inf` or `NaN` count as above
/// the target, so overflow on the far side of the root is harmless.
pub fn invert_increasing<F>(f: F, target: f64, start: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if target.is_nan() || target < 0.0 {
        return Err(Error::Domain(format!("cannot invert at {target}")));
    }
    if target == 0.0 {
        return Ok(0.0);
    }
    let below = |t: f64| {
        let v = f(t);
        !v.is_nan() && v < target
    };
    let mut hi = if start > 0.0 && start.is_finite() {
        start
    } else {
        1.0
    };
    while below(hi) {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Bracket(target));
        }
    }
    let mut lo = hi;
    while !below(lo) {
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return Ok(0.0);
        }
    }
    // The last halving crossed the target, so it lies in [lo, 2 lo].
    hi = 2.0 * lo;
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm - target).abs() <= tol * target {
            return Ok(mid);
        }
        if !fm.is_nan() && fm < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITER,
        lo,
        hi,
    })
}

/// Golden-section search for the maximum of a concave function on `[lo, hi]`.
/// Returns the best abscissa and value seen.
pub fn golden_max<F>(g: F, mut lo: f64, mut hi: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut best = (lo, g(lo));
    let end = g(hi);
    if end > best.1 {
        best = (hi, end);
    }
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut g1 = g(x1);
    let mut g2 = g(x2);
    for _ in 0..400 {
        if g1 > best.1 {
            best = (x1, g1);
        }
        if g2 > best.1 {
            best = (x2, g2);
        }
        if hi - lo <= 1e-15 * hi.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + INV_PHI * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - INV_PHI * (hi - lo);
            g1 = g(x1);
        }
    }
    best
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// `n` points spaced evenly in log between `a` and `b` (both > 0).
pub fn log_space(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_by_bisection() {
        let t = invert_increasing(|t| t * t, 2.0, 1.0, 1e-14).unwrap();
        assert!((t - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn tiny_and_huge_targets() {
        let t = invert_increasing(|t| t * t, 1e-200, 1.0, 1e-12).unwrap();
        assert!((t / 1e-100 - 1.0).abs() < 1e-11);
        let t = invert_increasing(|t| t.powi(3), 1e270, 1.0, 1e-12).unwrap();
        assert!((t / 1e90 - 1.0).abs() < 1e-11);
    }

    #[test]
    fn overflowing_side_counts_as_above() {
        let t = invert_increasing(|t| t.exp(), 1e300, 1.0, 1e-12).unwrap();
        assert!((t - 1e300f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (t, v) = golden_max(|t| -(t - 3.0) * (t - 3.0) + 1.0, 0.0, 10.0);
        assert!((t - 3.0).abs() < 1e-7);
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn slope_of_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        assert!((fit_slope(&xs, &ys) - 2.0).abs() < 1e-14);
    }
}
