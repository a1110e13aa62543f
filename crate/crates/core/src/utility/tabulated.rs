//! Marginal utility given as a table.
//!
//! `ln U′` is interpolated against `ln c` by a monotone piecewise cubic
//! Hermite curve (Fritsch–Butland slopes), so the interpolant is C¹ and
//! strictly decreasing. Outside the grid the end secants are continued
//! as power laws. `U` is recovered by quadrature of `U′`, anchored so that
//! `U(c₀) = −K` at the first grid point.

use crate::error::{invalid, Error, Result};
use crate::quad;

use super::power_integral;

const QUAD_REL_TOL: f64 = 1e-13;
const QUAD_MAX_INTERVALS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedMarginal {
    log_c: Vec<f64>,
    log_m: Vec<f64>,
    slope: Vec<f64>,
    c_first: f64,
    c_last: f64,
    offset: f64,
}

impl TabulatedMarginal {
    /// `consumption` strictly increasing and positive, `marginal` strictly
    /// decreasing and positive, at least two points.
    pub fn new(consumption: &[f64], marginal: &[f64], offset: f64) -> Result<Self> {
        if consumption.len() != marginal.len() {
            return Err(invalid("consumption and marginal grids differ in length"));
        }
        if consumption.len() < 2 {
            return Err(invalid(
                "a tabulated utility needs at least two grid points",
            ));
        }
        if !(offset.is_finite() && offset >= 0.0) {
            return Err(invalid("tabulated utility needs K >= 0"));
        }
        for (&c, &m) in consumption.iter().zip(marginal) {
            if !(c.is_finite() && c > 0.0 && m.is_finite() && m > 0.0) {
                return Err(invalid(
                    "grid consumption and marginal values must be finite and positive",
                ));
            }
        }
        for w in consumption.windows(2) {
            if w[1] <= w[0] {
                return Err(invalid(
                    "grid consumption values must be strictly increasing",
                ));
            }
        }
        for w in marginal.windows(2) {
            if w[1] >= w[0] {
                return Err(invalid(
                    "marginal utility must be strictly decreasing on the grid",
                ));
            }
        }
        let log_c: Vec<f64> = consumption.iter().map(|c| c.ln()).collect();
        let log_m: Vec<f64> = marginal.iter().map(|m| m.ln()).collect();
        let n = log_c.len();
        let secant: Vec<f64> = (0..n - 1)
            .map(|i| (log_m[i + 1] - log_m[i]) / (log_c[i + 1] - log_c[i]))
            .collect();
        let mut slope = vec![0.0; n];
        slope[0] = secant[0];
        slope[n - 1] = secant[n - 2];
        for i in 1..n - 1 {
            let (h0, h1) = (log_c[i] - log_c[i - 1], log_c[i + 1] - log_c[i]);
            let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
            // Both secants are negative, so the weighted harmonic mean is too.
            slope[i] = (w1 + w2) / (w1 / secant[i - 1] + w2 / secant[i]);
        }
        Ok(TabulatedMarginal {
            log_c,
            log_m,
            slope,
            c_first: consumption[0],
            c_last: consumption[n - 1],
            offset,
        })
    }

    fn last(&self) -> usize {
        self.log_c.len() - 1
    }

    pub(crate) fn upper_slope(&self) -> f64 {
        self.slope[self.last()]
    }

    fn lower_slope(&self) -> f64 {
        self.slope[0]
    }

    /// Interior segment containing `xi`, with its local coordinate.
    fn segment(&self, xi: f64) -> (usize, f64, f64) {
        let j = self
            .log_c
            .partition_point(|&v| v <= xi)
            .clamp(1, self.last())
            - 1;
        let h = self.log_c[j + 1] - self.log_c[j];
        (j, (xi - self.log_c[j]) / h, h)
    }

    fn hermite(&self, j: usize, t: f64, h: f64) -> (f64, f64) {
        let (y0, y1) = (self.log_m[j], self.log_m[j + 1]);
        let (d0, d1) = (self.slope[j] * h, self.slope[j + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * d1;
        let dvalue = (6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * d1;
        (value, dvalue)
    }

    /// `ln U′` as a function of `ln c`.
    fn log_marginal(&self, xi: f64) -> f64 {
        let n = self.last();
        if xi <= self.log_c[0] {
            self.log_m[0] + self.lower_slope() * (xi - self.log_c[0])
        } else if xi >= self.log_c[n] {
            self.log_m[n] + self.upper_slope() * (xi - self.log_c[n])
        } else {
            let (j, t, h) = self.segment(xi);
            self.hermite(j, t, h).0
        }
    }

    pub(crate) fn marginal(&self, c: f64) -> f64 {
        if c == 0.0 {
            return f64::INFINITY;
        }
        if c.is_infinite() {
            return 0.0;
        }
        self.log_marginal(c.ln()).exp()
    }

    pub(crate) fn inverse(&self, y: f64) -> f64 {
        let eta = y.ln();
        let n = self.last();
        if eta >= self.log_m[0] {
            return (self.log_c[0] + (eta - self.log_m[0]) / self.lower_slope()).exp();
        }
        if eta <= self.log_m[n] {
            return (self.log_c[n] + (eta - self.log_m[n]) / self.upper_slope()).exp();
        }
        // log_m is decreasing: the first index at or below eta closes the segment.
        let j = self.log_m.partition_point(|&v| v > eta) - 1;
        let h = self.log_c[j + 1] - self.log_c[j];
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut t = 0.5;
        for _ in 0..200 {
            let (g, dg) = self.hermite(j, t, h);
            let g = g - eta;
            if g > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let newton = t - g / dg;
            let next = if dg < 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - t).abs() <= 1e-16 || hi - lo <= 1e-16 {
                t = next;
                break;
            }
            t = next;
        }
        (self.log_c[j] + t * h).exp()
    }

    /// `∫_lower^upper U′(θ)^q dθ`: closed form on the power-law tails,
    /// Gauss–Kronrod in `ln θ` on each grid segment.
    pub(crate) fn marginal_power_integral(&self, q: f64, lower: f64, upper: f64) -> Result<f64> {
        let n = self.last();
        let (c_first, c_last) = (self.c_first, self.c_last);
        let mut total = 0.0;

        if lower < c_first {
            let hi = upper.min(c_first);
            let scale = c_first * (q * self.log_m[0]).exp();
            let e = q * self.lower_slope();
            total += scale
                * power_integral(e, lower / c_first, hi / c_first)
                    .ok_or_else(|| divergent(q, lower, upper))?;
        }
        if upper > c_last {
            let lo = lower.max(c_last);
            let scale = c_last * (q * self.log_m[n]).exp();
            let e = q * self.upper_slope();
            total += scale
                * power_integral(e, lo / c_last, upper / c_last)
                    .ok_or_else(|| divergent(q, lower, upper))?;
        }
        if upper > c_first && lower < c_last {
            let lo = lower.max(c_first).ln();
            let hi = upper.min(c_last).ln();
            let first = self.segment(lo).0;
            for j in first..n {
                let (a, b) = (lo.max(self.log_c[j]), hi.min(self.log_c[j + 1]));
                if a >= b {
                    if self.log_c[j] >= hi {
                        break;
                    }
                    continue;
                }
                let h = self.log_c[j + 1] - self.log_c[j];
                let base = self.log_c[j];
                let f = |xi: f64| {
                    let (v, _) = self.hermite(j, (xi - base) / h, h);
                    (xi + q * v).exp()
                };
                let res = quad::integrate(f, a, b, QUAD_REL_TOL, 0.0, QUAD_MAX_INTERVALS);
                if !res.converged {
                    return Err(Error::Numerical(format!(
                        "quadrature of U'^{q} on segment {j} did not converge"
                    )));
                }
                total += res.value;
            }
        }
        Ok(total)
    }

    pub(crate) fn value(&self, c: f64) -> f64 {
        let c0 = self.c_first;
        let signed = if c >= c0 {
            self.marginal_power_integral(1.0, c0, c)
        } else {
            self.marginal_power_integral(1.0, c, c0).map(|v| -v)
        };
        match signed {
            Ok(v) => v - self.offset,
            Err(_) if c < c0 => f64::NEG_INFINITY,
            Err(_) => f64::INFINITY,
        }
    }

    pub(crate) fn value_at_infinity(&self) -> f64 {
        self.value(f64::INFINITY)
    }
}

fn divergent(q: f64, lower: f64, upper: f64) -> Error {
    Error::Model(format!(
        "integral of U'^{q} over [{lower}, {upper}] diverges for the tabulated utility"
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{Branch, MarketParams};
    use crate::utility::UtilitySpec;
    use approx::assert_relative_eq;

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp())
            .collect()
    }

    fn tabulated_power(p: f64) -> UtilitySpec {
        let c = log_grid(1e-3, 1e3, 61);
        let m: Vec<f64> = c.iter().map(|c| c.powf(-p)).collect();
        UtilitySpec::custom(&c, &m, 0.0).unwrap()
    }

    #[test]
    fn rejects_malformed_grids() {
        assert!(TabulatedMarginal::new(&[1.0], &[1.0], 0.0).is_err());
        assert!(TabulatedMarginal::new(&[1.0, 2.0], &[1.0, 2.0], 0.0).is_err());
        assert!(TabulatedMarginal::new(&[2.0, 1.0], &[2.0, 1.0], 0.0).is_err());
        assert!(TabulatedMarginal::new(&[0.0, 1.0], &[2.0, 1.0], 0.0).is_err());
        assert!(TabulatedMarginal::new(&[1.0, 2.0], &[2.0, 1.0], -1.0).is_err());
    }

    #[test]
    fn reproduces_power_law_marginal_and_inverse() {
        let u = tabulated_power(2.0);
        for c in [1e-5, 3e-3, 0.5, 1.0, 7.0, 900.0, 1e5] {
            let m = u.u_marginal(c).unwrap();
            assert_relative_eq!(m, c.powi(-2), max_relative = 1e-12);
            assert_relative_eq!(u.inverse_marginal(m).unwrap(), c, max_relative = 1e-12);
        }
        assert_eq!(u.marginal_at_zero(), f64::INFINITY);
    }

    #[test]
    fn quadrature_matches_closed_form_kernels() {
        let roots = MarketParams::new(0.02, 0.06, 0.2, 0.04).unwrap().roots();
        for p in [0.5, 2.0] {
            let exact = UtilitySpec::power(p).unwrap();
            let table = tabulated_power(p);
            for (branch, lo, hi) in [
                (Branch::Plus, 0.0, 0.7),
                (Branch::Plus, 0.01, 40.0),
                (Branch::Minus, 0.2, f64::INFINITY),
                (Branch::Minus, 1e-4, 3.0),
                (Branch::Minus, 5e3, f64::INFINITY),
            ] {
                let a = exact.kernel_integral(&roots, branch, lo, hi).unwrap();
                let b = table.kernel_integral(&roots, branch, lo, hi).unwrap();
                assert_relative_eq!(a, b, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn value_is_anchored_and_matches_power_differences() {
        let table = tabulated_power(2.0);
        let exact = UtilitySpec::power(2.0).unwrap();
        assert_eq!(table.u_value(log_grid(1e-3, 1e3, 61)[0]).unwrap(), 0.0);
        for (a, b) in [(0.01, 1.0), (1.0, 50.0), (1e-4, 1e4)] {
            let d1 = table.u_value(b).unwrap() - table.u_value(a).unwrap();
            let d2 = exact.u_value(b).unwrap() - exact.u_value(a).unwrap();
            assert_relative_eq!(d1, d2, max_relative = 1e-10);
        }
        // Slope −2 at the lower end: U(0) = −∞ and U(∞) is finite.
        assert_eq!(table.value_at_zero(), f64::NEG_INFINITY);
        assert!(table.value_at_infinity().is_finite());
    }

    #[test]
    fn curved_table_stays_monotone() {
        let c = log_grid(0.01, 100.0, 9);
        let m: Vec<f64> = c
            .iter()
            .map(|c| (c + 0.5f64).powf(-1.5) + 0.1 * c.powf(-3.0))
            .collect();
        let u = UtilitySpec::custom(&c, &m, 0.1).unwrap();
        let mut prev = f64::INFINITY;
        for x in log_grid(1e-3, 1e3, 500) {
            let v = u.u_marginal(x).unwrap();
            assert!(v < prev);
            prev = v;
            assert_relative_eq!(u.inverse_marginal(v).unwrap(), x, max_relative = 1e-12);
        }
    }
}
