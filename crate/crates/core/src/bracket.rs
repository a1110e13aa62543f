//! Bracketing root search for monotone functions of a positive argument.

use crate::error::{Error, Result};

/// Which way the function moves as the argument grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Slope {
    #[cfg_attr(not(test), allow(dead_code))]
    Increasing,
    Decreasing,
}

/// Expands a geometric bracket around `start` by `factor` until `f`
/// changes sign, returning `(lo, hi)` with the root between them.
pub(crate) fn expand<F>(
    mut f: F,
    start: f64,
    factor: f64,
    max_steps: usize,
    slope: Slope,
) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let sign = |v: f64| match slope {
        Slope::Decreasing => v,
        Slope::Increasing => -v,
    };
    let v0 = sign(f(start)?);
    if v0 == 0.0 {
        return Ok((start, start));
    }
    // Positive means the root lies at larger arguments.
    let upward = v0 > 0.0;
    let mut inner = start;
    for _ in 0..max_steps {
        let outer = if upward {
            inner * factor
        } else {
            inner / factor
        };
        if !(outer.is_finite() && outer > 0.0) {
            break;
        }
        let v = sign(f(outer)?);
        if (upward && v <= 0.0) || (!upward && v >= 0.0) {
            return Ok(if upward {
                (inner, outer)
            } else {
                (outer, inner)
            });
        }
        inner = outer;
    }
    Err(Error::Numerical(format!(
        "no sign change found within {max_steps} geometric expansions from {start}"
    )))
}

/// Bisects `[lo, hi]` at geometric midpoints until `hi/lo − 1 ≤ rel_tol`
/// or the midpoint can no longer be represented between the ends.
pub(crate) fn log_bisect<F>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    rel_tol: f64,
    max_iter: usize,
    slope: Slope,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if lo == hi {
        return Ok(lo);
    }
    for _ in 0..max_iter {
        let mid = lo.sqrt() * hi.sqrt();
        if hi / lo - 1.0 <= rel_tol || !(mid > lo && mid < hi) {
            return Ok(mid.clamp(lo, hi));
        }
        let v = f(mid)?;
        if v == 0.0 {
            return Ok(mid);
        }
        let root_above = match slope {
            Slope::Decreasing => v > 0.0,
            Slope::Increasing => v < 0.0,
        };
        if root_above {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numerical(format!(
        "bisection did not reach relative width {rel_tol} in {max_iter} steps (bracket [{lo}, {hi}])"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_a_power_root_from_either_side() {
        let f = |x: f64| Ok(3.0 - x * x);
        for start in [1e-6, 1.0, 1e6] {
            let (lo, hi) = expand(f, start, 4.0, 200, Slope::Decreasing).unwrap();
            let root = log_bisect(f, lo, hi, 1e-15, 400, Slope::Decreasing).unwrap();
            assert!((root - 3f64.sqrt()).abs() < 1e-14);
        }
        let g = |x: f64| Ok(x.ln() - 2.0);
        let (lo, hi) = expand(g, 1.0, 2.0, 50, Slope::Increasing).unwrap();
        let root = log_bisect(g, lo, hi, 1e-15, 400, Slope::Increasing).unwrap();
        assert!((root - 2f64.exp()).abs() < 1e-13);
    }

    #[test]
    fn reports_missing_sign_change() {
        let f = |_x: f64| Ok(1.0);
        assert!(matches!(
            expand(f, 1.0, 4.0, 20, Slope::Decreasing),
            Err(Error::Numerical(_))
        ));
    }
}
