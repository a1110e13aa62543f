//! Market and mortality constants and the characteristic roots derived
//! from them.
//!
//! Every closed form in the solver is expressed through two quadratics.
//! The wealth exponents `λ±` solve `γλ² − (r − β − γ)λ − r = 0`, and the
//! value exponents are the shifted roots `ρ± = 1 + λ±`, which solve
//! `γρ² − (r − β + γ)ρ − β = 0`.

use serde::Serialize;

use crate::error::{invalid, Result};

/// Riskless rate, risky drift and volatility, and mortality hazard rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketParams {
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
    pub beta: f64,
}

impl MarketParams {
    /// Builds and validates a parameter set.
    pub fn new(r: f64, mu: f64, sigma: f64, beta: f64) -> Result<Self> {
        validate_params(MarketParams { r, mu, sigma, beta })
    }

    /// `γ = ½((μ − r)/σ)²`.
    pub fn gamma(&self) -> f64 {
        0.5 * self.sharpe() * self.sharpe()
    }

    /// Market price of risk `(μ − r)/σ`.
    pub fn sharpe(&self) -> f64 {
        (self.mu - self.r) / self.sigma
    }

    pub fn roots(&self) -> RootSet {
        derive_roots(self)
    }
}

/// Returns `p` unchanged if `r > 0`, `σ > 0`, `β > 0` and `μ > r`.
pub fn validate_params(p: MarketParams) -> Result<MarketParams> {
    let finite = [p.r, p.mu, p.sigma, p.beta].iter().all(|v| v.is_finite());
    if !finite {
        return Err(invalid("market parameters must be finite"));
    }
    if p.r <= 0.0 {
        return Err(invalid("r must be positive"));
    }
    if p.sigma <= 0.0 {
        return Err(invalid("sigma must be positive"));
    }
    if p.beta <= 0.0 {
        return Err(invalid("beta must be positive"));
    }
    if p.mu <= p.r {
        return Err(invalid("mu must exceed r"));
    }
    Ok(p)
}

/// Roots of the two characteristic quadratics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootSet {
    pub gamma: f64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub rho_minus: f64,
    pub rho_plus: f64,
}

impl RootSet {
    /// `γ(λ+ − λ−)`, the common denominator of the dual kernels.
    pub fn spread(&self) -> f64 {
        self.gamma * (self.lambda_plus - self.lambda_minus)
    }

    pub fn lambda(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Plus => self.lambda_plus,
            Branch::Minus => self.lambda_minus,
        }
    }
}

/// Selects the positive or negative root.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// Solves `γλ² − (r − β − γ)λ − r = 0` and sets `ρ± = 1 + λ±`.
///
/// The product of the roots is `−r/γ < 0`, so for valid parameters the
/// discriminant is positive and the roots straddle zero.
pub fn derive_roots(p: &MarketParams) -> RootSet {
    let gamma = p.gamma();
    let b = -(p.r - p.beta - gamma);
    let c = -p.r;
    let disc = (b * b - 4.0 * gamma * c).sqrt();
    // Cancellation-free form: q carries the sign of b.
    let q = -0.5 * (b + b.signum() * disc);
    let (x1, x2) = (q / gamma, c / q);
    let (lambda_minus, lambda_plus) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
    RootSet {
        gamma,
        lambda_minus,
        lambda_plus,
        rho_minus: 1.0 + lambda_minus,
        rho_plus: 1.0 + lambda_plus,
    }
}
