//! Feedback rules `x ↦ (c(x), π(x))` for simulation.

use crate::dual::PolicySolution;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controls {
    pub consumption: f64,
    pub investment: f64,
}

/// A consumption/investment rule in feedback form.
pub trait FeedbackPolicy: Sync {
    fn controls(&self, wealth: f64) -> Result<Controls>;
}

impl FeedbackPolicy for PolicySolution {
    fn controls(&self, wealth: f64) -> Result<Controls> {
        let (consumption, investment) = self.policy(wealth)?;
        Ok(Controls {
            consumption,
            investment,
        })
    }
}

impl<P: FeedbackPolicy + ?Sized> FeedbackPolicy for &P {
    fn controls(&self, wealth: f64) -> Result<Controls> {
        (**self).controls(wealth)
    }
}

/// Constant consumption and investment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPolicy {
    pub consumption: f64,
    pub investment: f64,
}

impl FeedbackPolicy for ConstantPolicy {
    fn controls(&self, _wealth: f64) -> Result<Controls> {
        Ok(Controls {
            consumption: self.consumption,
            investment: self.investment,
        })
    }
}

/// Wraps a policy and scales its investment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledInvestment<P> {
    pub inner: P,
    pub factor: f64,
}

impl<P: FeedbackPolicy> FeedbackPolicy for ScaledInvestment<P> {
    fn controls(&self, wealth: f64) -> Result<Controls> {
        let c = self.inner.controls(wealth)?;
        Ok(Controls {
            consumption: c.consumption,
            investment: self.factor * c.investment,
        })
    }
}

/// A policy sampled on a grid uniform in `u = ln(1 + x/scale)` and
/// interpolated linearly; beyond the grid it is extended linearly in `x`.
/// Avoids one dual inversion per simulation step.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPolicy {
    scale: f64,
    du: f64,
    wealth: Vec<f64>,
    consumption: Vec<f64>,
    investment: Vec<f64>,
}

impl TabulatedPolicy {
    pub fn new<P: FeedbackPolicy>(
        policy: &P,
        scale: f64,
        max_wealth: f64,
        nodes: usize,
    ) -> Result<Self> {
        if !(scale > 0.0 && max_wealth > 0.0 && max_wealth.is_finite()) || nodes < 2 {
            return Err(invalid(
                "tabulated policy needs positive scale, finite max_wealth and >= 2 nodes",
            ));
        }
        let u_max = (max_wealth / scale).ln_1p();
        let du = u_max / (nodes - 1) as f64;
        let mut wealth = Vec::with_capacity(nodes);
        let mut consumption = Vec::with_capacity(nodes);
        let mut investment = Vec::with_capacity(nodes);
        for k in 0..nodes {
            let x = scale * (k as f64 * du).exp_m1();
            let c = policy.controls(x)?;
            wealth.push(x);
            consumption.push(c.consumption);
            investment.push(c.investment);
        }
        Ok(TabulatedPolicy {
            scale,
            du,
            wealth,
            consumption,
            investment,
        })
    }

    /// Grid of 4097 nodes from 0 to `1000·scale`.
    pub fn from_solution(solution: &PolicySolution, scale: f64) -> Result<Self> {
        Self::new(solution, scale, 1000.0 * scale, 4097)
    }

    pub fn nodes(&self) -> usize {
        self.wealth.len()
    }
}

impl FeedbackPolicy for TabulatedPolicy {
    fn controls(&self, wealth: f64) -> Result<Controls> {
        if !(wealth >= 0.0) {
            return Err(Error::Domain(format!(
                "policy evaluated at wealth {wealth}"
            )));
        }
        let n = self.wealth.len();
        let u = (wealth / self.scale).ln_1p();
        let k = ((u / self.du) as usize).min(n - 2);
        let (x0, x1) = (self.wealth[k], self.wealth[k + 1]);
        let t = (wealth - x0) / (x1 - x0);
        let lerp = |v: &[f64]| v[k] + t * (v[k + 1] - v[k]);
        Ok(Controls {
            consumption: lerp(&self.consumption),
            investment: lerp(&self.investment),
        })
    }
}
