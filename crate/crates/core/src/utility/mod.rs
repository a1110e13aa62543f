//! Utility families, inverse marginal utility, and the kernel integrals
//! `∫ dθ / U′(θ)^λ` that every dual closed form is built from.
//!
//! Infinite limits (`U(0) = −∞`, `U′(0) = +∞`, an infinite upper
//! integration bound) are carried as IEEE infinities. Divergent integrals
//! are reported as [`Error::Model`], never as overflowed finite values.

mod tabulated;

use std::sync::Arc;

pub use tabulated::TabulatedMarginal;

use crate::error::{domain, invalid, Error, Result};
use crate::market::{Branch, RootSet};

/// A strictly increasing, strictly concave utility of consumption.
#[derive(Debug, Clone, PartialEq)]
pub enum UtilitySpec {
    /// `U(c) = c^(1−p)/(1−p)`.
    Power { p: f64 },
    /// `U(c) = ln c`.
    Log,
    /// `U(c) = ((c+η)^(1−p) − η^(1−p))/(1−p) − K`: finite `U(0) = −K` and
    /// finite `U′(0) = η^(−p)`.
    ShiftedPower { p: f64, eta: f64, offset: f64 },
    /// Marginal utility tabulated on a grid, see [`TabulatedMarginal`].
    Custom(Arc<TabulatedMarginal>),
}

impl UtilitySpec {
    pub fn power(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0) || p == 1.0 {
            return Err(invalid(
                "power utility needs p > 0 and p != 1 (use log for p = 1)",
            ));
        }
        Ok(UtilitySpec::Power { p })
    }

    pub fn log() -> Self {
        UtilitySpec::Log
    }

    pub fn shifted_power(p: f64, eta: f64, offset: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0) || p == 1.0 {
            return Err(invalid("shifted power utility needs p > 0 and p != 1"));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(invalid("shifted power utility needs eta > 0"));
        }
        if !(offset.is_finite() && offset >= 0.0) {
            return Err(invalid("shifted power utility needs K >= 0"));
        }
        Ok(UtilitySpec::ShiftedPower { p, eta, offset })
    }

    pub fn custom(consumption: &[f64], marginal: &[f64], offset: f64) -> Result<Self> {
        let table = TabulatedMarginal::new(consumption, marginal, offset)?;
        Ok(UtilitySpec::Custom(Arc::new(table)))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            UtilitySpec::Power { .. } => "power",
            UtilitySpec::Log => "log",
            UtilitySpec::ShiftedPower { .. } => "shifted_power",
            UtilitySpec::Custom(_) => "custom",
        }
    }

    /// `U(c)` for `c ≥ 0`; at zero, the (possibly infinite) limit.
    pub fn u_value(&self, c: f64) -> Result<f64> {
        check_consumption(c)?;
        Ok(self.value(c))
    }

    /// `U′(c)` for `c ≥ 0`; at zero, the (possibly infinite) limit.
    pub fn u_marginal(&self, c: f64) -> Result<f64> {
        check_consumption(c)?;
        Ok(self.marginal(c))
    }

    /// `I(y)`: the inverse of `U′` on `(0, U′(0))`, and `0` on `[U′(0), ∞)`.
    pub fn inverse_marginal(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(domain(format!(
                "inverse marginal utility needs y > 0, got {y}"
            )));
        }
        Ok(self.inverse(y))
    }

    pub fn value_at_zero(&self) -> f64 {
        self.value(0.0)
    }

    pub fn marginal_at_zero(&self) -> f64 {
        self.marginal(0.0)
    }

    /// `lim U(c)` as `c → ∞`.
    pub fn value_at_infinity(&self) -> f64 {
        match *self {
            UtilitySpec::Power { p } => {
                if p < 1.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            UtilitySpec::Log => f64::INFINITY,
            UtilitySpec::ShiftedPower { p, eta, offset } => {
                if p < 1.0 {
                    f64::INFINITY
                } else {
                    eta.powf(1.0 - p) / (p - 1.0) - offset
                }
            }
            UtilitySpec::Custom(ref t) => t.value_at_infinity(),
        }
    }

    pub(crate) fn value(&self, c: f64) -> f64 {
        match *self {
            UtilitySpec::Power { p } => c.powf(1.0 - p) / (1.0 - p),
            UtilitySpec::Log => c.ln(),
            UtilitySpec::ShiftedPower { p, eta, offset } => {
                let k = 1.0 - p;
                if c.is_infinite() {
                    return self.value_at_infinity();
                }
                eta.powf(k) * (k * (c / eta).ln_1p()).exp_m1() / k - offset
            }
            UtilitySpec::Custom(ref t) => t.value(c),
        }
    }

    pub(crate) fn marginal(&self, c: f64) -> f64 {
        match *self {
            UtilitySpec::Power { p } => c.powf(-p),
            UtilitySpec::Log => 1.0 / c,
            UtilitySpec::ShiftedPower { p, eta, .. } => (c + eta).powf(-p),
            UtilitySpec::Custom(ref t) => t.marginal(c),
        }
    }

    pub(crate) fn inverse(&self, y: f64) -> f64 {
        match *self {
            UtilitySpec::Power { p } => y.powf(-1.0 / p),
            UtilitySpec::Log => 1.0 / y,
            UtilitySpec::ShiftedPower { p, eta, .. } => {
                if y >= eta.powf(-p) {
                    0.0
                } else {
                    (y.powf(-1.0 / p) - eta).max(0.0)
                }
            }
            UtilitySpec::Custom(ref t) => t.inverse(y),
        }
    }

    /// `∫_lower^upper U′(θ)^q dθ` for `0 ≤ lower ≤ upper ≤ ∞`.
    pub(crate) fn marginal_power_integral(&self, q: f64, lower: f64, upper: f64) -> Result<f64> {
        if lower == upper {
            return Ok(0.0);
        }
        let out = match *self {
            UtilitySpec::Power { p } => power_integral(-p * q, lower, upper),
            UtilitySpec::Log => power_integral(-q, lower, upper),
            UtilitySpec::ShiftedPower { p, eta, .. } => {
                power_integral(-p * q, lower + eta, upper + eta)
            }
            UtilitySpec::Custom(ref t) => return t.marginal_power_integral(q, lower, upper),
        };
        out.ok_or_else(|| divergent(q, lower, upper))
    }

    /// `∫_lower^upper dθ / U′(θ)^λ` with `λ = λ+` or `λ−`.
    pub fn kernel_integral(
        &self,
        roots: &RootSet,
        branch: Branch,
        lower: f64,
        upper: f64,
    ) -> Result<f64> {
        if !(lower >= 0.0 && upper >= lower) || lower.is_infinite() {
            return Err(domain(format!(
                "kernel integral needs 0 <= lower <= upper, got [{lower}, {upper}]"
            )));
        }
        self.marginal_power_integral(-roots.lambda(branch), lower, upper)
    }

    /// True iff `∫_c^∞ dθ / U′(θ)^λ− < ∞` for every `c > 0`.
    pub fn check_finiteness(&self, roots: &RootSet) -> bool {
        let lm = roots.lambda_minus;
        match *self {
            UtilitySpec::Power { p } | UtilitySpec::ShiftedPower { p, .. } => p * lm < -1.0,
            UtilitySpec::Log => lm < -1.0,
            UtilitySpec::Custom(ref t) => t.upper_slope() * -lm < -1.0,
        }
    }
}

fn check_consumption(c: f64) -> Result<()> {
    if c >= 0.0 {
        Ok(())
    } else {
        Err(domain(format!("consumption must be nonnegative, got {c}")))
    }
}

fn divergent(q: f64, lower: f64, upper: f64) -> Error {
    Error::Model(format!(
        "integral of U'^{q} over [{lower}, {upper}] diverges; the utility violates the finiteness assumption"
    ))
}

/// `∫_lo^hi t^e dt` for `0 ≤ lo ≤ hi ≤ ∞`, or `None` when divergent.
pub(crate) fn power_integral(e: f64, lo: f64, hi: f64) -> Option<f64> {
    if lo == hi {
        return Some(0.0);
    }
    let k = e + 1.0;
    if hi.is_infinite() {
        if k >= 0.0 || lo == 0.0 {
            return None;
        }
        return Some(-lo.powf(k) / k);
    }
    if lo == 0.0 {
        if k <= 0.0 {
            return None;
        }
        return Some(hi.powf(k) / k);
    }
    let log_ratio = (hi / lo).ln();
    if k == 0.0 {
        return Some(log_ratio);
    }
    Some(lo.powf(k) * (k * log_ratio).exp_m1() / k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::MarketParams;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn m0_roots() -> RootSet {
        MarketParams::new(0.02, 0.06, 0.2, 0.04).unwrap().roots()
    }

    fn shifted() -> UtilitySpec {
        UtilitySpec::shifted_power(2.0, 1.0, 0.2).unwrap()
    }

    #[test]
    fn values_at_reference_points() {
        let half = UtilitySpec::power(0.5).unwrap();
        assert_relative_eq!(half.u_value(4.0).unwrap(), 4.0, max_relative = 1e-15);
        assert_eq!(UtilitySpec::log().u_value(0.0).unwrap(), f64::NEG_INFINITY);
        assert_relative_eq!(shifted().u_value(0.0).unwrap(), -0.2);
        assert!(half.u_value(-1.0).is_err());
    }

    #[test]
    fn marginals_at_reference_points() {
        let two = UtilitySpec::power(2.0).unwrap();
        assert_relative_eq!(two.u_marginal(2.0).unwrap(), 0.25, max_relative = 1e-15);
        assert_eq!(shifted().u_marginal(0.0).unwrap(), 1.0);
        assert_eq!(UtilitySpec::log().u_marginal(0.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn inverse_marginal_reference_points() {
        let half = UtilitySpec::power(0.5).unwrap();
        assert_relative_eq!(
            half.inverse_marginal(4.0).unwrap(),
            0.0625,
            max_relative = 1e-15
        );
        assert_eq!(shifted().inverse_marginal(2.0).unwrap(), 0.0);
        assert_eq!(shifted().inverse_marginal(1.0).unwrap(), 0.0);
        assert_relative_eq!(
            shifted().inverse_marginal(0.25).unwrap(),
            1.0,
            max_relative = 1e-15
        );
        assert!(half.inverse_marginal(0.0).is_err());
        assert!(half.inverse_marginal(-2.0).is_err());
    }

    #[test]
    fn limits_at_infinity() {
        assert_eq!(
            UtilitySpec::power(0.5).unwrap().value_at_infinity(),
            f64::INFINITY
        );
        assert_eq!(UtilitySpec::power(2.0).unwrap().value_at_infinity(), 0.0);
        assert_relative_eq!(shifted().value_at_infinity(), 0.8, max_relative = 1e-15);
        assert_relative_eq!(shifted().u_value(1e12).unwrap(), 0.8, max_relative = 1e-11);
    }

    #[test]
    fn kernel_reference_values() {
        let roots = m0_roots();
        let half = UtilitySpec::power(0.5).unwrap();
        assert_eq!(
            half.kernel_integral(&roots, Branch::Minus, 3.0, 3.0)
                .unwrap(),
            0.0
        );
        // ∫_1^∞ θ^(pλ−) dθ with pλ− = −1 − 1/√2·(…) ≈ −1.2071068.
        let k = half
            .kernel_integral(&roots, Branch::Minus, 1.0, f64::INFINITY)
            .unwrap();
        assert_relative_eq!(k, 4.828_427_124_746_19, max_relative = 1e-12);
        // ∫_0^∞ (1+θ)^(2λ−) dθ = 1/(1 + 2√2).
        let k = shifted()
            .kernel_integral(&roots, Branch::Minus, 0.0, f64::INFINITY)
            .unwrap();
        assert_relative_eq!(k, 1.0 / (1.0 + 2.0 * 2f64.sqrt()), max_relative = 1e-13);
    }

    #[test]
    fn divergent_kernel_is_a_model_error() {
        let roots = m0_roots();
        let weak = UtilitySpec::power(0.3).unwrap();
        let err = weak
            .kernel_integral(&roots, Branch::Minus, 1.0, f64::INFINITY)
            .unwrap_err();
        assert!(matches!(err, Error::Model(_)));
        let two = UtilitySpec::power(2.0).unwrap();
        assert!(matches!(
            two.kernel_integral(&roots, Branch::Minus, 0.0, 1.0),
            Err(Error::Model(_))
        ));
    }

    #[test]
    fn finiteness_by_exponent() {
        let roots = m0_roots();
        assert!(UtilitySpec::power(2.0).unwrap().check_finiteness(&roots));
        assert!(UtilitySpec::power(0.5).unwrap().check_finiteness(&roots));
        assert!(!UtilitySpec::power(0.3).unwrap().check_finiteness(&roots));
        assert!(UtilitySpec::log().check_finiteness(&roots));
        assert!(shifted().check_finiteness(&roots));
    }

    #[test]
    fn power_integral_edges() {
        assert_eq!(power_integral(-1.0, 1.0, f64::INFINITY), None);
        assert_eq!(power_integral(-1.0, 0.0, 1.0), None);
        assert_relative_eq!(power_integral(-1.0, 1.0, 2f64.exp()).unwrap(), 2.0);
        assert_relative_eq!(power_integral(2.0, 0.0, 3.0).unwrap(), 9.0);
    }

    fn families() -> Vec<UtilitySpec> {
        vec![
            UtilitySpec::power(0.5).unwrap(),
            UtilitySpec::power(2.0).unwrap(),
            UtilitySpec::log(),
            shifted(),
            UtilitySpec::shifted_power(0.7, 0.3, 0.0).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn monotone_concave_and_invertible(log_c in -6.0f64..6.0) {
            let c = log_c.exp();
            for u in families() {
                let m = u.u_marginal(c).unwrap();
                prop_assert!(m > 0.0);
                let h = 1e-4 * c;
                prop_assert!(u.u_marginal(c + h).unwrap() < u.u_marginal(c - h).unwrap());
                if m < u.marginal_at_zero() {
                    let back = u.inverse_marginal(m).unwrap();
                    prop_assert!((back - c).abs() <= 1e-10 * (1.0 + c), "{:?} {} {}", u, c, back);
                }
            }
        }

        #[test]
        fn kernel_is_additive(l in 0.01f64..5.0, w1 in 0.0f64..5.0, w2 in 0.0f64..5.0) {
            let roots = m0_roots();
            let (m, up) = (l + w1, l + w1 + w2);
            for u in families() {
                for (branch, hi) in [(Branch::Plus, up), (Branch::Minus, up), (Branch::Minus, f64::INFINITY)] {
                    let whole = u.kernel_integral(&roots, branch, l, hi).unwrap();
                    let split = u.kernel_integral(&roots, branch, l, m).unwrap()
                        + u.kernel_integral(&roots, branch, m, hi).unwrap();
                    prop_assert!((whole - split).abs() <= 1e-10 * whole.abs().max(1e-300));
                }
            }
        }
    }
}
