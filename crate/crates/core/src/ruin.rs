//! Probability of lifetime ruin under the optimal policy.
//!
//! In dual coordinates the ruin probability is `ψ̂(y) = (y/ȳ)^ρ+` for
//! `0 < y ≤ ȳ`, and identically zero when `ȳ = ∞`.

use crate::dual::PolicySolution;
use crate::error::{domain, Result};

/// `ψ̂(y)` for one bankruptcy level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuinCurve {
    pub rho_plus: f64,
    pub y_bar: f64,
}

impl RuinCurve {
    pub fn new(rho_plus: f64, y_bar: f64) -> Self {
        RuinCurve { rho_plus, y_bar }
    }

    pub fn psi_hat(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(domain(format!(
                "dual variable must be nonnegative, got {y}"
            )));
        }
        if self.y_bar.is_infinite() || y == 0.0 {
            return Ok(0.0);
        }
        if y > self.y_bar * (1.0 + 1e-12) {
            return Err(domain(format!(
                "dual variable {y} exceeds the bankruptcy level {}",
                self.y_bar
            )));
        }
        Ok((self.rho_plus * (y.ln() - self.y_bar.ln())).exp().min(1.0))
    }

    /// `dψ̂/dy`.
    pub fn slope(&self, y: f64) -> Result<f64> {
        Ok(self.rho_plus * self.psi_hat(y)? / y)
    }

    /// `βψ̂ − (β − r)yψ̂′ − γy²ψ̂″`, which vanishes identically.
    pub fn ode_residual(&self, y: f64, beta: f64, r: f64, gamma: f64) -> Result<f64> {
        let psi = self.psi_hat(y)?;
        let rp = self.rho_plus;
        let d1 = rp * psi;
        let d2 = rp * (rp - 1.0) * psi;
        Ok(beta * psi - (beta - r) * d1 - gamma * d2)
    }
}

/// `ψ(x) = ψ̂(𝒴(x))`; one at zero wealth, zero everywhere in regime i.
pub fn psi_of_x(x: f64, solution: &PolicySolution) -> Result<f64> {
    let y = solution.dual_variable(x)?;
    if y.is_infinite() {
        return Ok(0.0);
    }
    solution.ruin_curve().psi_hat(y)
}
