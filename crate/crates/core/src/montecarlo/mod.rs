//! Monte Carlo verification of the closed-form solution.
//!
//! [`simulate_primal`] runs the controlled wealth process under any
//! [`FeedbackPolicy`]; [`simulate_dual`] runs the dual geometric Brownian
//! motion against the bankruptcy level. Results are bit-identical for a
//! given seed and configuration whatever the number of worker threads.

mod dual;
mod policy;
mod primal;
mod rng;
mod stats;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::utility::UtilitySpec;

pub use dual::simulate_dual;
pub use policy::{ConstantPolicy, Controls, FeedbackPolicy, ScaledInvestment, TabulatedPolicy};
pub use primal::simulate_primal;

/// Environment variable capping the number of simulation threads.
pub const THREADS_ENV: &str = "RUINBOUND_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    /// Base step in years.
    pub dt: f64,
    /// Horizon cap; `None` picks `t_max` with `e^{−β t_max} = 1e-6`.
    pub t_max: Option<f64>,
    pub seed: u64,
    pub antithetic: bool,
    /// Simulate on `dt/2^refine`, bridging the base-grid Brownian path, so
    /// runs differing only in `refine` share their noise.
    pub refine: u32,
    /// Worker threads; `None` reads `RUINBOUND_THREADS`, else all cores.
    pub threads: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_paths: 100_000,
            dt: 1e-3,
            t_max: None,
            seed: 0,
            antithetic: true,
            refine: 0,
            threads: None,
        }
    }
}

impl SimConfig {
    pub fn horizon(&self, beta: f64) -> f64 {
        self.t_max.unwrap_or_else(|| 1e6f64.ln() / beta)
    }

    pub fn step(&self) -> f64 {
        self.dt / f64::from(1u32 << self.refine)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(invalid("n_paths must be at least 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid(format!(
                    "t_max must be positive and finite, got {t}"
                )));
            }
        }
        if self.refine > 16 {
            return Err(invalid(format!(
                "refine must be at most 16, got {}",
                self.refine
            )));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads must be at least 1"));
        }
        Ok(())
    }

    fn thread_count(&self) -> Result<Option<usize>> {
        if let Some(n) = self.threads {
            return Ok(Some(n));
        }
        match std::env::var(THREADS_ENV) {
            Ok(s) => match s.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(Some(n)),
                _ => Err(invalid(format!(
                    "{THREADS_ENV} must be a positive integer, got {s:?}"
                ))),
            },
            Err(_) => Ok(None),
        }
    }

    /// `(unit count, paths in unit k)`: antithetic pairs, with a lone path
    /// at the end when `n_paths` is odd.
    fn units(&self) -> (usize, impl Fn(usize) -> usize + Sync + '_) {
        let per = if self.antithetic { 2 } else { 1 };
        let n_units = self.n_paths.div_ceil(per);
        (n_units, move |k| per.min(self.n_paths - k * per))
    }
}

/// Utility and penalty, for the expected-utility accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct Payoff {
    pub utility: UtilitySpec,
    pub penalty: f64,
}

/// Monte Carlo estimates with standard errors over simulation units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEstimate {
    /// `P(τ₀ < τ_d)`.
    pub ruin_prob: f64,
    pub ruin_se: f64,
    /// `E[e^{−βτ₀}]` (primal only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ruin_discounted: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ruin_discounted_se: Option<f64>,
    /// `E ∫_0^{τ₀∧τ_d} U(c_t) dt`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utility_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utility_se: Option<f64>,
    /// `E ∫_0^{τ₀} e^{−βt} U(c_t) dt`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utility_discounted: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utility_discounted_se: Option<f64>,
    /// `E[∫_0^{τ₀} e^{−βt} U(c_t) dt + P e^{−βτ₀}]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalized_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalized_se: Option<f64>,
    pub n_effective: usize,
}

/// Per-unit averages of the per-path outcomes.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct UnitSample {
    ruin: f64,
    ruin_discounted: f64,
    utility: f64,
    utility_discounted: f64,
    penalized: f64,
}

impl UnitSample {
    fn average(paths: &[UnitSample]) -> UnitSample {
        let n = paths.len() as f64;
        let sum = |f: fn(&UnitSample) -> f64| paths.iter().map(f).sum::<f64>() / n;
        UnitSample {
            ruin: sum(|s| s.ruin),
            ruin_discounted: sum(|s| s.ruin_discounted),
            utility: sum(|s| s.utility),
            utility_discounted: sum(|s| s.utility_discounted),
            penalized: sum(|s| s.penalized),
        }
    }
}

/// Runs `unit(k, paths)` for every unit and returns the samples in unit
/// order.
fn run_units<F>(config: &SimConfig, unit: F) -> Result<Vec<UnitSample>>
where
    F: Fn(u64, usize) -> Result<UnitSample> + Sync,
{
    let (n_units, size) = config.units();
    let work = || -> Result<Vec<UnitSample>> {
        (0..n_units)
            .into_par_iter()
            .map(|k| unit(k as u64, size(k)))
            .collect()
    };
    match config.thread_count()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Numerical(format!("could not start simulation threads: {e}")))?
            .install(work),
        None => work(),
    }
}

fn summarize(
    config: &SimConfig,
    samples: &[UnitSample],
    with_payoff: bool,
    primal: bool,
) -> SimEstimate {
    let column =
        |f: fn(&UnitSample) -> f64| stats::mean_se(&samples.iter().map(f).collect::<Vec<_>>());
    let (ruin_prob, ruin_se) = column(|s| s.ruin);
    let opt = |on: bool, f: fn(&UnitSample) -> f64| {
        if on {
            let (m, s) = column(f);
            (Some(m), Some(s))
        } else {
            (None, None)
        }
    };
    let (ruin_discounted, ruin_discounted_se) = opt(primal, |s| s.ruin_discounted);
    let (utility_mean, utility_se) = opt(with_payoff, |s| s.utility);
    let (utility_discounted, utility_discounted_se) = opt(with_payoff, |s| s.utility_discounted);
    let (penalized_value, penalized_se) = opt(with_payoff, |s| s.penalized);
    SimEstimate {
        ruin_prob,
        ruin_se,
        ruin_discounted,
        ruin_discounted_se,
        utility_mean,
        utility_se,
        utility_discounted,
        utility_discounted_se,
        penalized_value,
        penalized_se,
        n_effective: config.n_paths,
    }
}
