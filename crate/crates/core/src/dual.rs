//! Dual solution of the penalized consumption–investment problem.
//!
//! For a bankruptcy penalty `P` the value function is built in terms of
//! the dual variable `y = V′(x)`:
//!
//! * `𝒳(y; a, B)` maps the dual variable to wealth and is strictly
//!   decreasing; its inverse is `𝒴(x; a, B)`.
//! * `𝒥(y; a, A)` gives the value at that wealth, with `A = (λ+/ρ+)·B`.
//! * The five regimes of [`Regime`] pick the consumption floor `a`, the
//!   coefficient `B` and the bankruptcy level `ȳ` from `P`.
//!
//! Optimal feedback controls are `c = I(y)` and
//! `π = −((μ−r)/σ²)·y·𝒳′(y)`, using the closed-form derivative of `𝒳`
//! rather than differentiating `V` numerically.

use std::fmt;

use serde::Serialize;

use crate::bracket::{expand, log_bisect, Slope};
use crate::error::{domain, invalid, Error, Result};
use crate::market::{validate_params, Branch, MarketParams, RootSet};
use crate::ruin::RuinCurve;
use crate::utility::UtilitySpec;

/// Numerical knobs for the root searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative bracket width at which `invert_chi` and `solve_a` stop.
    pub root_rel: f64,
    /// Bisection step cap.
    pub max_bisection: usize,
    /// Geometric bracket expansions allowed before giving up.
    pub max_expansions: usize,
    /// `|P − P*| ≤ pstar_rel·(1 + |P*|)` is treated as `P = P*`.
    pub pstar_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            root_rel: 1e-14,
            max_bisection: 400,
            max_expansions: 200,
            pstar_rel: 1e-12,
        }
    }
}

/// Market, utility and derived roots: everything the closed forms need.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    market: MarketParams,
    roots: RootSet,
    utility: UtilitySpec,
    tol: Tolerances,
}

/// One point of the dual parametrization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualPoint {
    pub y: f64,
    /// `I(y)`.
    pub consumption: f64,
    /// `𝒳(y)`.
    pub wealth: f64,
    /// `𝒳′(y)`, which equals `1/V″(x)`.
    pub wealth_slope: f64,
    /// `𝒥(y)`, which equals `V(x)`.
    pub value: f64,
}

struct Kernels {
    consumption: f64,
    plus: f64,
    minus: f64,
}

impl Model {
    pub fn new(market: MarketParams, utility: UtilitySpec) -> Result<Self> {
        let market = validate_params(market)?;
        let roots = market.roots();
        if !utility.check_finiteness(&roots) {
            return Err(Error::Model(format!(
                "{} utility violates the finiteness assumption: the integral of 1/U'^lambda_- \
                 (lambda_- = {}) diverges at infinity",
                utility.kind_name(),
                roots.lambda_minus
            )));
        }
        Ok(Model {
            market,
            roots,
            utility,
            tol: Tolerances::default(),
        })
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn market(&self) -> &MarketParams {
        &self.market
    }

    pub fn roots(&self) -> &RootSet {
        &self.roots
    }

    pub fn utility(&self) -> &UtilitySpec {
        &self.utility
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// `U(0)/β`, the penalty below which ruin never happens.
    pub fn penalty_floor(&self) -> f64 {
        self.utility.value_at_zero() / self.market.beta
    }

    /// `lim U(c)/β`; penalties at or above it have no continuous optimum.
    pub fn penalty_ceiling(&self) -> f64 {
        self.utility.value_at_infinity() / self.market.beta
    }

    fn kernels(&self, y: f64, a: f64) -> Result<Kernels> {
        if !(y > 0.0 && y.is_finite()) {
            return Err(domain(format!(
                "dual variable must be positive and finite, got {y}"
            )));
        }
        if a > 0.0 && y > self.utility.marginal(a) {
            return Err(domain(format!(
                "dual variable {y} exceeds U'(a) for a = {a}"
            )));
        }
        let consumption = self.utility.inverse(y).max(a);
        let plus = self
            .utility
            .kernel_integral(&self.roots, Branch::Plus, a, consumption)?;
        let minus =
            self.utility
                .kernel_integral(&self.roots, Branch::Minus, consumption, f64::INFINITY)?;
        Ok(Kernels {
            consumption,
            plus,
            minus,
        })
    }

    /// `𝒳(y; a, B)`.
    pub fn chi(&self, y: f64, a: f64, b: f64) -> Result<f64> {
        let k = self.kernels(y, a)?;
        Ok(self.chi_from(y, b, &k))
    }

    /// `𝒳′(y; a, B)`. The `I′(y)` terms cancel identically, so only the
    /// kernels enter.
    pub fn chi_slope(&self, y: f64, a: f64, b: f64) -> Result<f64> {
        let k = self.kernels(y, a)?;
        Ok(self.slope_from(y, b, &k))
    }

    /// `𝒥(y; a, A)`.
    pub fn jay(&self, y: f64, a: f64, big_a: f64) -> Result<f64> {
        let k = self.kernels(y, a)?;
        Ok(self.jay_from(y, big_a, &k))
    }

    /// Wealth, slope and value at `y`, with `A = (λ+/ρ+)·B`.
    pub fn dual_point(&self, y: f64, a: f64, b: f64) -> Result<DualPoint> {
        let k = self.kernels(y, a)?;
        let big_a = self.roots.lambda_plus / self.roots.rho_plus * b;
        Ok(DualPoint {
            y,
            consumption: k.consumption,
            wealth: self.chi_from(y, b, &k),
            wealth_slope: self.slope_from(y, b, &k),
            value: self.jay_from(y, big_a, &k),
        })
    }

    fn chi_from(&self, y: f64, b: f64, k: &Kernels) -> f64 {
        let RootSet {
            lambda_plus: lp,
            lambda_minus: lm,
            ..
        } = self.roots;
        let ylp = y.powf(lp);
        b * ylp + k.consumption / self.market.r
            - (ylp * k.plus / lp + y.powf(lm) * k.minus / lm) / self.roots.spread()
    }

    fn slope_from(&self, y: f64, b: f64, k: &Kernels) -> f64 {
        let RootSet {
            lambda_plus: lp,
            lambda_minus: lm,
            ..
        } = self.roots;
        let ylp1 = y.powf(lp - 1.0);
        lp * b * ylp1 - (ylp1 * k.plus + y.powf(lm - 1.0) * k.minus) / self.roots.spread()
    }

    fn jay_from(&self, y: f64, big_a: f64, k: &Kernels) -> f64 {
        let RootSet {
            rho_plus: rp,
            rho_minus: rm,
            ..
        } = self.roots;
        let yrp = y.powf(rp);
        big_a * yrp + self.utility.value(k.consumption) / self.market.beta
            - (yrp * k.plus / rp + y.powf(rm) * k.minus / rm) / self.roots.spread()
    }

    /// `𝒴(x; a, B)`: the `y` with `𝒳(y; a, B) = x`.
    ///
    /// With `a > 0` the domain is `x ≥ 𝒳(U′(a))`. With `a = 0` and `B = 0`
    /// it is `x > 0`; with `a = 0` and `B < 0`, `𝒳` is extended to all
    /// `y > 0` and every real `x` has a preimage.
    pub fn invert_chi(&self, x: f64, a: f64, b: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(domain("wealth is NaN"));
        }
        let f = |y: f64| self.chi(y, a, b).map(|v| v - x);
        let (lo, hi) = if a > 0.0 {
            let cap = self.utility.marginal(a);
            let floor = self.chi(cap, a, b)?;
            if x < floor {
                return Err(domain(format!(
                    "wealth {x} is below the domain floor {floor}"
                )));
            }
            if x == floor {
                return Ok(cap);
            }
            expand(f, cap, 4.0, self.tol.max_expansions, Slope::Decreasing)?
        } else {
            if b == 0.0 && x <= 0.0 {
                return Err(domain(format!("wealth must be positive, got {x}")));
            }
            expand(f, 1.0, 4.0, self.tol.max_expansions, Slope::Decreasing)?
        };
        log_bisect(
            f,
            lo,
            hi,
            self.tol.root_rel,
            self.tol.max_bisection,
            Slope::Decreasing,
        )
    }

    /// `P* = U(0)/β − U′(0)^ρ− /(βλ−) · ∫_0^∞ dθ/U′(θ)^λ−`, defined when
    /// `U(0)` and `U′(0)` are finite.
    pub fn pstar(&self) -> Result<f64> {
        let u0 = self.utility.value_at_zero();
        let m0 = self.utility.marginal_at_zero();
        if !(u0.is_finite() && m0.is_finite()) {
            return Err(Error::Model(
                "P* is undefined unless U(0) and U'(0) are finite".into(),
            ));
        }
        let RootSet {
            lambda_minus: lm,
            rho_minus: rm,
            ..
        } = self.roots;
        let beta = self.market.beta;
        let k0 = self
            .utility
            .kernel_integral(&self.roots, Branch::Minus, 0.0, f64::INFINITY)?;
        Ok(u0 / beta - m0.powf(rm) / (beta * lm) * k0)
    }

    /// `F(c) = ρ+P − U′(c)^ρ− ∫_c^∞ dθ/U′^λ− /(γλ−ρ−) − (ρ+/β)U(c) + (λ+/r)cU′(c)`,
    /// strictly decreasing in `c`; its root is the consumption floor `a(P)`.
    pub fn floor_equation(&self, penalty: f64, c: f64) -> Result<f64> {
        if !(c > 0.0) {
            return Err(domain(format!(
                "consumption floor candidate must be positive, got {c}"
            )));
        }
        let RootSet {
            gamma,
            lambda_minus: lm,
            lambda_plus: lp,
            rho_minus: rm,
            rho_plus: rp,
        } = self.roots;
        let m = self.utility.marginal(c);
        let tail = self
            .utility
            .kernel_integral(&self.roots, Branch::Minus, c, f64::INFINITY)?;
        Ok(rp * penalty
            - m.powf(rm) * tail / (gamma * lm * rm)
            - rp / self.market.beta * self.utility.value(c)
            + lp / self.market.r * c * m)
    }

    /// Consumption floor `a(P) > 0` for regimes ii and v.
    pub fn solve_a(&self, penalty: f64) -> Result<f64> {
        let floor = self.penalty_floor();
        let ceiling = self.penalty_ceiling();
        if !(penalty > floor && penalty < ceiling) {
            return Err(domain(format!(
                "a(P) needs U(0)/beta < P < lim U/beta, got P = {penalty} outside ({floor}, {ceiling})"
            )));
        }
        if self.utility.marginal_at_zero().is_finite() && penalty <= self.pstar()? {
            return Err(domain(format!(
                "a(P) needs P > P* when U'(0) is finite, got P = {penalty}"
            )));
        }
        let guess = self.utility.inverse(1.0);
        let start = if guess > 0.0 && guess.is_finite() {
            guess
        } else {
            1.0
        };
        let f = |c: f64| self.floor_equation(penalty, c);
        let (lo, hi) = expand(f, start, 2.0, 1100, Slope::Decreasing).map_err(|e| {
            Error::Numerical(format!("could not bracket a(P) for P = {penalty}: {e}"))
        })?;
        log_bisect(
            f,
            lo,
            hi,
            self.tol.root_rel,
            self.tol.max_bisection,
            Slope::Decreasing,
        )
    }

    /// `(B, ȳ)` for the given regime; `a` must already be solved (ii, v) or
    /// zero (iii, iv).
    pub fn solve_b(&self, penalty: f64, a: f64, regime: Regime) -> Result<(f64, f64)> {
        let RootSet {
            lambda_minus: lm,
            lambda_plus: lp,
            rho_minus: rm,
            rho_plus: rp,
            ..
        } = self.roots;
        let beta = self.market.beta;
        match regime {
            Regime::I => Ok((0.0, f64::INFINITY)),
            Regime::III => {
                let excess = penalty - self.penalty_floor();
                if !(excess >= 0.0) {
                    return Err(domain("regime iii needs P >= U(0)/beta"));
                }
                let k0 =
                    self.utility
                        .kernel_integral(&self.roots, Branch::Minus, 0.0, f64::INFINITY)?;
                let y_bar = (-beta * lm * excess / k0).powf(1.0 / rm);
                let b = -beta * excess / (self.roots.spread() * y_bar.powf(rp));
                Ok((b + 0.0, y_bar))
            }
            Regime::II | Regime::IV | Regime::V => {
                if regime == Regime::IV && a != 0.0 {
                    return Err(invalid("regime iv has a = 0"));
                }
                let m = self.utility.marginal(a);
                if !m.is_finite() {
                    return Err(domain(format!("U'(a) is infinite at a = {a}")));
                }
                let tail =
                    self.utility
                        .kernel_integral(&self.roots, Branch::Minus, a, f64::INFINITY)?;
                let b = m.powf(lm - lp) * tail / (self.roots.spread() * lm)
                    - a / self.market.r * m.powf(-lp);
                Ok((b, m))
            }
        }
    }

    /// Regime and coefficients for penalty `P`.
    pub fn select_case(&self, penalty: f64) -> Result<DualCoefficients> {
        if !penalty.is_finite() {
            return Err(invalid(format!("penalty must be finite, got {penalty}")));
        }
        let ceiling = self.penalty_ceiling();
        if penalty >= ceiling {
            return Err(Error::Model(format!(
                "no continuous optimal strategy exists for P = {penalty} >= lim U(c)/beta = {ceiling}"
            )));
        }
        let lambda_ratio = self.roots.lambda_plus / self.roots.rho_plus;
        let build = |regime, a: f64, b: f64, y_bar: f64, x_bar: f64| DualCoefficients {
            regime,
            penalty,
            a,
            b,
            big_a: lambda_ratio * b,
            y_bar,
            x_bar,
        };
        if penalty <= self.penalty_floor() {
            return Ok(build(Regime::I, 0.0, 0.0, f64::INFINITY, 0.0));
        }
        let m0 = self.utility.marginal_at_zero();
        let with_floor = |regime| -> Result<DualCoefficients> {
            let a = self.solve_a(penalty)?;
            let (b, y_bar) = self.solve_b(penalty, a, regime)?;
            Ok(build(regime, a, b, y_bar, 0.0))
        };
        if m0.is_infinite() {
            return with_floor(Regime::II);
        }
        let pstar = self.pstar()?;
        if (penalty - pstar).abs() <= self.tol.pstar_rel * (1.0 + pstar.abs()) {
            let (b, y_bar) = self.solve_b(penalty, 0.0, Regime::IV)?;
            Ok(build(Regime::IV, 0.0, b, y_bar, 0.0))
        } else if penalty < pstar {
            let (b, y_bar) = self.solve_b(penalty, 0.0, Regime::III)?;
            let x_bar = self.chi(m0, 0.0, b)?;
            Ok(build(Regime::III, 0.0, b, y_bar, x_bar))
        } else {
            with_floor(Regime::V)
        }
    }

    /// Full solution at penalty `P`.
    pub fn solve(&self, penalty: f64) -> Result<PolicySolution> {
        let coeffs = self.select_case(penalty)?;
        Ok(PolicySolution {
            model: self.clone(),
            coeffs,
        })
    }
}

/// The five regimes of the penalized problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `P ≤ U(0)/β`: ruin never happens, `a = 0`, `B = 0`.
    #[serde(rename = "i")]
    I,
    /// `U′(0) = ∞`, `P > U(0)/β`: positive consumption floor.
    #[serde(rename = "ii")]
    II,
    /// `U′(0) < ∞`, `U(0)/β < P < P*`: zero consumption below `x̄`.
    #[serde(rename = "iii")]
    III,
    /// `U′(0) < ∞`, `P = P*`.
    #[serde(rename = "iv")]
    IV,
    /// `U′(0) < ∞`, `P > P*`: positive consumption floor.
    #[serde(rename = "v")]
    V,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::I => "i",
            Regime::II => "ii",
            Regime::III => "iii",
            Regime::IV => "iv",
            Regime::V => "v",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Coefficients of the dual solution for one penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualCoefficients {
    pub regime: Regime,
    pub penalty: f64,
    pub a: f64,
    pub b: f64,
    /// `(λ+/ρ+)·B`.
    pub big_a: f64,
    /// Dual level at which wealth hits zero; infinite in regime i.
    pub y_bar: f64,
    /// Wealth below which consumption is zero (regime iii only).
    pub x_bar: f64,
}

impl DualCoefficients {
    /// Whether bankruptcy is reachable (every regime except i).
    pub fn is_constrained(&self) -> bool {
        self.regime != Regime::I
    }
}

/// Everything the optimal policy reports at one wealth level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolicyPoint {
    pub wealth: f64,
    /// `V′(x)`.
    pub y: f64,
    pub value: f64,
    pub consumption: f64,
    pub investment: f64,
    pub ruin: f64,
}

/// Terms of the dual HJB equation at one wealth level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HjbTerms {
    pub wealth: f64,
    pub value: f64,
    pub y: f64,
    pub consumption: f64,
    pub utility: f64,
    pub wealth_slope: f64,
    beta: f64,
    r: f64,
    gamma: f64,
}

impl HjbTerms {
    /// `βV − (rx − I(V′))V′ − U(I(V′)) + γ(V′)²/V″`.
    pub fn residual(&self) -> f64 {
        self.residual_with_value(self.value)
    }

    /// The residual with `V` replaced by `value`.
    pub fn residual_with_value(&self, value: f64) -> f64 {
        let y = self.y;
        self.beta * value - (self.r * self.wealth - self.consumption) * y - self.utility
            + self.gamma * y * y * self.wealth_slope
    }
}

/// Value function, feedback controls and ruin probability at one penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySolution {
    model: Model,
    coeffs: DualCoefficients,
}

impl PolicySolution {
    pub fn coefficients(&self) -> &DualCoefficients {
        &self.coeffs
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn ruin_curve(&self) -> RuinCurve {
        RuinCurve::new(self.model.roots.rho_plus, self.coeffs.y_bar)
    }

    /// `𝒴(x)`; at `x = 0` the bankruptcy level `ȳ`.
    pub fn dual_variable(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) || x.is_infinite() {
            return Err(domain(format!(
                "wealth must be finite and nonnegative, got {x}"
            )));
        }
        if x == 0.0 {
            return Ok(self.coeffs.y_bar);
        }
        self.model.invert_chi(x, self.coeffs.a, self.coeffs.b)
    }

    pub fn dual_point(&self, x: f64) -> Result<DualPoint> {
        let y = self.dual_variable(x)?;
        self.model.dual_point(y, self.coeffs.a, self.coeffs.b)
    }

    pub fn evaluate(&self, x: f64) -> Result<PolicyPoint> {
        let y = self.dual_variable(x)?;
        if y.is_infinite() {
            // Regime i at zero wealth: the limits as x → 0.
            return Ok(PolicyPoint {
                wealth: x,
                y,
                value: self.model.penalty_floor(),
                consumption: 0.0,
                investment: 0.0,
                ruin: 0.0,
            });
        }
        let dp = self.model.dual_point(y, self.coeffs.a, self.coeffs.b)?;
        let m = &self.model.market;
        let investment = -(m.mu - m.r) / (m.sigma * m.sigma) * y * dp.wealth_slope;
        let value = if x == 0.0 {
            self.coeffs.penalty
        } else {
            dp.value
        };
        Ok(PolicyPoint {
            wealth: x,
            y,
            value,
            consumption: dp.consumption,
            investment,
            ruin: self.ruin_curve().psi_hat(y)?,
        })
    }

    /// `V*(x; P)`.
    pub fn value(&self, x: f64) -> Result<f64> {
        self.evaluate(x).map(|p| p.value)
    }

    /// Optimal `(c, π)` at wealth `x`.
    pub fn policy(&self, x: f64) -> Result<(f64, f64)> {
        self.evaluate(x).map(|p| (p.consumption, p.investment))
    }

    /// Probability of lifetime ruin from wealth `x` under the optimal policy.
    pub fn ruin_probability(&self, x: f64) -> Result<f64> {
        crate::ruin::psi_of_x(x, self)
    }

    pub fn hjb_terms(&self, x: f64) -> Result<HjbTerms> {
        if !(x > 0.0) {
            return Err(domain(format!(
                "HJB residual needs interior wealth, got {x}"
            )));
        }
        let dp = self.dual_point(x)?;
        Ok(HjbTerms {
            wealth: x,
            value: dp.value,
            y: dp.y,
            consumption: dp.consumption,
            utility: self.model.utility.value(dp.consumption),
            wealth_slope: dp.wealth_slope,
            beta: self.model.market.beta,
            r: self.model.market.r,
            gamma: self.model.roots.gamma,
        })
    }

    pub fn hjb_residual(&self, x: f64) -> Result<f64> {
        self.hjb_terms(x).map(|t| t.residual())
    }
}
