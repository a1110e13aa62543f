//! Euler scheme for the controlled wealth process
//! `dX = [rX + (μ−r)π − c] dt + σπ dZ`, absorbed at zero.

use super::rng::{AuxStream, Brownian};
use super::{run_units, summarize, FeedbackPolicy, Payoff, SimConfig, SimEstimate, UnitSample};
use crate::error::{invalid, Error, Result};
use crate::market::{validate_params, MarketParams};

struct Path {
    wealth: f64,
    death: f64,
    alive: bool,
    ruin_time: Option<f64>,
    utility: f64,
    utility_discounted: f64,
}

/// Simulates `policy` from wealth `x0`. Each path runs until ruin or the
/// horizon; the undiscounted utility stops at the sampled death time, the
/// discounted one runs on to ruin or the horizon.
pub fn simulate_primal<P: FeedbackPolicy>(
    policy: &P,
    x0: f64,
    market: &MarketParams,
    payoff: Option<&Payoff>,
    config: &SimConfig,
) -> Result<SimEstimate> {
    let market = validate_params(*market)?;
    config.validate()?;
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(invalid(format!(
            "initial wealth must be positive and finite, got {x0}"
        )));
    }
    if let Some(p) = payoff {
        if !p.penalty.is_finite() {
            return Err(invalid(format!(
                "penalty must be finite, got {}",
                p.penalty
            )));
        }
    }
    let MarketParams { r, mu, sigma, beta } = market;
    let t_max = config.horizon(beta);
    let h = config.step();
    let n_steps = (t_max / h).ceil() as u64;

    let samples = run_units(config, |unit, size| {
        let mut aux = AuxStream::new(config.seed, unit);
        let u = aux.uniform();
        let deaths = [-u.ln() / beta, -(-u).ln_1p() / beta];
        let mut paths: Vec<Path> = deaths[..size]
            .iter()
            .map(|&death| Path {
                wealth: x0,
                death,
                alive: true,
                ruin_time: None,
                utility: 0.0,
                utility_discounted: 0.0,
            })
            .collect();
        let mut bm = Brownian::new(config.seed, unit, config.refine);
        let mut controls = [None, None];
        for step in 0..n_steps {
            let t = step as f64 * h;
            let dt = h.min(t_max - t);
            if dt <= 0.0 {
                break;
            }
            let mut any_alive = false;
            let mut need_noise = false;
            for (j, path) in paths.iter().enumerate() {
                controls[j] = if path.alive {
                    let c = policy.controls(path.wealth)?;
                    any_alive = true;
                    need_noise |= c.investment != 0.0;
                    Some(c)
                } else {
                    None
                };
            }
            if !any_alive {
                break;
            }
            let z = if need_noise { bm.next() } else { 0.0 };
            let discount = if payoff.is_some() {
                (-beta * t).exp()
            } else {
                0.0
            };
            for (j, path) in paths.iter_mut().enumerate() {
                let Some(c) = controls[j] else { continue };
                let sign = if j == 0 { 1.0 } else { -1.0 };
                let x = path.wealth;
                let x1 = x
                    + (r * x + (mu - r) * c.investment - c.consumption) * dt
                    + sigma * c.investment * dt.sqrt() * sign * z;
                if !x1.is_finite() {
                    return Err(Error::Numerical(format!(
                        "wealth became non-finite at t = {t} (from x = {x}, c = {}, pi = {})",
                        c.consumption, c.investment
                    )));
                }
                let (frac, ruined) = if x1 <= 0.0 {
                    (x / (x - x1), true)
                } else {
                    (1.0, false)
                };
                let span = frac * dt;
                if let Some(p) = payoff {
                    let u = p.utility.value(c.consumption);
                    if !u.is_finite() {
                        return Err(Error::Numerical(format!(
                            "utility is not finite at consumption {}",
                            c.consumption
                        )));
                    }
                    let lived = (path.death - t).clamp(0.0, span);
                    path.utility += u * lived;
                    path.utility_discounted += u * discount * -(-beta * span).exp_m1() / beta;
                }
                if ruined {
                    path.wealth = 0.0;
                    path.alive = false;
                    path.ruin_time = Some(t + span);
                } else {
                    path.wealth = x1;
                }
            }
        }
        let outcomes: Vec<UnitSample> = paths
            .iter()
            .map(|path| {
                let (ruin, ruin_discounted) = match path.ruin_time {
                    Some(t0) => (f64::from(u8::from(t0 < path.death)), (-beta * t0).exp()),
                    None => (0.0, 0.0),
                };
                let penalty = payoff.map_or(0.0, |p| p.penalty);
                UnitSample {
                    ruin,
                    ruin_discounted,
                    utility: path.utility,
                    utility_discounted: path.utility_discounted,
                    penalized: path.utility_discounted + penalty * ruin_discounted,
                }
            })
            .collect();
        Ok(UnitSample::average(&outcomes))
    })?;
    Ok(summarize(config, &samples, payoff.is_some(), true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::ConstantPolicy;
    use crate::UtilitySpec;

    fn m0() -> MarketParams {
        MarketParams::new(0.02, 0.06, 0.2, 0.04).unwrap()
    }

    #[test]
    fn no_consumption_no_risk_never_ruins() {
        let cfg = SimConfig {
            n_paths: 200,
            dt: 0.05,
            seed: 3,
            ..SimConfig::default()
        };
        let policy = ConstantPolicy {
            consumption: 0.0,
            investment: 0.0,
        };
        let payoff = Payoff {
            utility: UtilitySpec::power(0.5).unwrap(),
            penalty: -1.0,
        };
        let est = simulate_primal(&policy, 1.0, &m0(), Some(&payoff), &cfg).unwrap();
        assert_eq!(est.ruin_prob, 0.0);
        assert_eq!(est.ruin_se, 0.0);
        assert_eq!(est.utility_mean, Some(0.0));
    }

    #[test]
    fn deterministic_depletion_matches_hitting_time() {
        // X(t) = 2.5 − 1.5 e^{0.02 t} hits zero at t* = 50 ln(5/3).
        let cfg = SimConfig {
            n_paths: 20_000,
            dt: 0.01,
            seed: 1,
            ..SimConfig::default()
        };
        let policy = ConstantPolicy {
            consumption: 0.05,
            investment: 0.0,
        };
        let est = simulate_primal(&policy, 1.0, &m0(), None, &cfg).unwrap();
        assert!((est.ruin_prob - 0.36).abs() <= 3.0 * est.ruin_se, "{est:?}");
        let disc = est.ruin_discounted.unwrap();
        assert!((disc - 0.36).abs() < 1e-4, "{disc}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let policy = ConstantPolicy {
            consumption: 0.0,
            investment: 0.0,
        };
        let cfg = SimConfig {
            n_paths: 0,
            ..SimConfig::default()
        };
        assert!(simulate_primal(&policy, 1.0, &m0(), None, &cfg).is_err());
        assert!(simulate_primal(&policy, 0.0, &m0(), None, &SimConfig::default()).is_err());
    }
}
