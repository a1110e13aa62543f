//! Exact simulation of the dual process
//! `dY = −(r−β) Y dt − ((μ−r)/σ) Y dZ` against the bankruptcy level.
//!
//! `ln Y` is a Brownian motion with drift, so steps are exact and the
//! chance of crossing `ln ȳ` inside a step is the Brownian-bridge
//! probability. Each path contributes the conditional probability of
//! having crossed before its death time rather than a sampled indicator.

use super::rng::{AuxStream, Brownian};
use super::{run_units, summarize, SimConfig, SimEstimate, UnitSample};
use crate::error::{domain, Result};
use crate::market::{validate_params, MarketParams};

struct Path {
    log_y: f64,
    death: f64,
    survival: f64,
    ruin: f64,
    alive: bool,
}

/// Estimates `E[e^{−βτ}] = P(τ < τ_d)` for the first passage `τ` of `Y`
/// from `y0` up to `y_bar`.
pub fn simulate_dual(
    y0: f64,
    y_bar: f64,
    market: &MarketParams,
    config: &SimConfig,
) -> Result<SimEstimate> {
    let market = validate_params(*market)?;
    config.validate()?;
    if !(y0 > 0.0 && y_bar.is_finite() && y0 < y_bar) {
        return Err(domain(format!(
            "dual simulation needs 0 < y0 < y_bar < inf, got y0 = {y0}, y_bar = {y_bar}"
        )));
    }
    let MarketParams { r, beta, .. } = market;
    let theta = market.sharpe();
    let drift = beta - r - 0.5 * theta * theta;
    let barrier = y_bar.ln();
    let t_max = config.horizon(beta);
    let h = config.step();
    let sqrt_h = h.sqrt();

    let advance = |path: &mut Path, dt: f64, sqrt_dt: f64, z: f64| {
        let x = path.log_y;
        let x1 = x + drift * dt + theta * sqrt_dt * z;
        let p = if x1 >= barrier {
            1.0
        } else {
            let k = (barrier - x) * (barrier - x1) * (2.0 / (theta * theta * dt));
            if k > 745.0 {
                0.0
            } else {
                (-k).exp()
            }
        };
        path.ruin += path.survival * p;
        path.survival *= 1.0 - p;
        path.log_y = x1;
        if path.survival == 0.0 {
            path.alive = false;
        }
    };

    let samples = run_units(config, |unit, size| {
        let mut aux = AuxStream::new(config.seed, unit);
        let u = aux.uniform();
        let deaths = [-u.ln() / beta, -(-u).ln_1p() / beta];
        let mut paths: Vec<Path> = deaths[..size]
            .iter()
            .map(|&death| Path {
                log_y: y0.ln(),
                death: death.min(t_max),
                survival: 1.0,
                ruin: 0.0,
                alive: true,
            })
            .collect();
        let mut t = 0.0f64;
        let mut step = 0u64;
        let mut bm = Brownian::new(config.seed, unit, config.refine);
        loop {
            let t_next = (step + 1) as f64 * h;
            // Paths whose horizon ends inside this step finish with a
            // partial step on auxiliary noise.
            let mut full = false;
            for path in paths.iter_mut().filter(|p| p.alive) {
                if path.death <= t_next {
                    let dt = path.death - t;
                    if dt > 0.0 {
                        let z = aux.normal();
                        advance(path, dt, dt.sqrt(), z);
                    }
                    path.alive = false;
                } else {
                    full = true;
                }
            }
            if !full {
                break;
            }
            let z = bm.next();
            for (j, path) in paths.iter_mut().enumerate() {
                if path.alive {
                    advance(path, h, sqrt_h, if j == 0 { z } else { -z });
                }
            }
            step += 1;
            t = t_next;
        }
        let outcomes: Vec<UnitSample> = paths
            .iter()
            .map(|p| UnitSample {
                ruin: p.ruin,
                ..UnitSample::default()
            })
            .collect();
        Ok(UnitSample::average(&outcomes))
    })?;
    Ok(summarize(config, &samples, false, false))
}
