//! Calibration of the bankruptcy penalty to a ruin-probability target.
//!
//! `ψ(x; P)` is nondecreasing in `P`, so the multiplier matching
//! `ψ(x; P) = φ` is found by plain bisection on `P`, stopping on the
//! constraint value rather than on `P`.

use crate::dual::{Model, PolicySolution, Tolerances};
use crate::error::{invalid, Error, Result};
use crate::market::MarketParams;
use crate::utility::UtilitySpec;

/// Doublings of the lower penalty bracket before giving up. `P` overflows
/// long before this when `ψ` refuses to fall.
const MAX_DOUBLINGS: usize = 1100;

#[derive(Debug, Clone)]
pub struct CalibrationRequest {
    pub market: MarketParams,
    pub utility: UtilitySpec,
    /// Initial wealth at which the constraint is imposed.
    pub wealth: f64,
    /// Ruin-probability target in `[0, 1]`.
    pub phi: f64,
    pub tol_phi: f64,
    pub max_iter: usize,
    /// Reject targets above the unconstrained ruin probability instead of
    /// returning the unconstrained optimum.
    pub strict: bool,
    pub tolerances: Tolerances,
}

impl CalibrationRequest {
    pub fn new(market: MarketParams, utility: UtilitySpec, wealth: f64, phi: f64) -> Self {
        CalibrationRequest {
            market,
            utility,
            wealth,
            phi,
            tol_phi: 1e-6,
            max_iter: 200,
            strict: false,
            tolerances: Tolerances::default(),
        }
    }

    pub fn model(&self) -> Result<Model> {
        Ok(Model::new(self.market, self.utility.clone())?.with_tolerances(self.tolerances))
    }

    fn validate(&self) -> Result<()> {
        if !(self.wealth > 0.0 && self.wealth.is_finite()) {
            return Err(invalid(format!(
                "wealth must be positive and finite, got {}",
                self.wealth
            )));
        }
        if !(0.0..=1.0).contains(&self.phi) {
            return Err(invalid(format!("phi must lie in [0, 1], got {}", self.phi)));
        }
        if !(self.tol_phi > 0.0 && self.tol_phi < 1.0) {
            return Err(invalid(format!(
                "tol_phi must lie in (0, 1), got {}",
                self.tol_phi
            )));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// One bisection step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub penalty: f64,
    pub ruin: f64,
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub penalty: f64,
    pub solution: PolicySolution,
    pub achieved_phi: f64,
    /// Bisection steps taken; zero when no search was needed.
    pub iterations: usize,
    pub binding: bool,
    pub warning: Option<String>,
    pub trace: Vec<TracePoint>,
}

/// `ψ(x; P = 0)`.
///
/// When `lim U/β ≤ 0` no optimum exists at `P = 0`; the ruin probability
/// then tends to one as `P ↑ 0`, and that limit is returned.
pub fn unconstrained_ruin(req: &CalibrationRequest) -> Result<f64> {
    req.validate()?;
    let model = req.model()?;
    unconstrained_ruin_for(&model, req.wealth)
}

fn unconstrained_ruin_for(model: &Model, wealth: f64) -> Result<f64> {
    if model.penalty_ceiling() <= 0.0 {
        return Ok(1.0);
    }
    model.solve(0.0)?.ruin_probability(wealth)
}

fn ruin_at(model: &Model, penalty: f64, wealth: f64) -> Result<(PolicySolution, f64)> {
    let solution = model.solve(penalty)?;
    let psi = solution.ruin_probability(wealth)?;
    Ok((solution, psi))
}

/// Finds `P ≤ 0` with `|ψ(x; P) − φ| ≤ tol_phi`.
pub fn calibrate_penalty(req: &CalibrationRequest) -> Result<CalibrationResult> {
    req.validate()?;
    let model = req.model()?;
    let x = req.wealth;
    let psi0 = unconstrained_ruin_for(&model, x)?;
    let done =
        |penalty, solution, achieved_phi, iterations, binding, warning, trace| CalibrationResult {
            penalty,
            solution,
            achieved_phi,
            iterations,
            binding,
            warning,
            trace,
        };

    if req.phi >= psi0 {
        let warning = if req.phi > psi0 {
            let msg = format!(
                "phi = {} exceeds the unconstrained ruin probability {psi0}; the constraint is slack",
                req.phi
            );
            if req.strict {
                return Err(invalid(msg));
            }
            Some(msg)
        } else {
            None
        };
        if model.penalty_ceiling() <= 0.0 {
            return Err(Error::Model(format!(
                "the constraint is slack but no continuous optimal strategy exists at P = 0 \
                 (lim U(c)/beta = {})",
                model.penalty_ceiling()
            )));
        }
        let solution = model.solve(0.0)?;
        return Ok(done(0.0, solution, psi0, 0, false, warning, Vec::new()));
    }

    let floor = model.penalty_floor();
    if req.phi == 0.0 && floor.is_finite() {
        let solution = model.solve(floor)?;
        return Ok(done(floor, solution, 0.0, 0, true, None, Vec::new()));
    }

    let mut trace = Vec::new();
    let lo = if floor.is_finite() {
        floor
    } else {
        let mut p = -1.0f64;
        let mut found = None;
        for _ in 0..MAX_DOUBLINGS {
            if !p.is_finite() {
                break;
            }
            let (solution, psi) = ruin_at(&model, p, x)?;
            if (psi - req.phi).abs() <= req.tol_phi {
                return Ok(done(p, solution, psi, 0, true, None, trace));
            }
            if psi < req.phi {
                found = Some(p);
                break;
            }
            p *= 2.0;
        }
        found.ok_or_else(|| {
            Error::Numerical(format!(
                "could not find a penalty with ruin probability below {} at wealth {x}; \
                 last tried P = {p}",
                req.phi
            ))
        })?
    };
    // ψ(hi) = ψ0 > φ; the endpoint itself is never evaluated.
    let mut lo = lo;
    let mut hi = 0.0f64.min(model.penalty_ceiling());
    for iter in 1..=req.max_iter {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        let (solution, psi) = ruin_at(&model, mid, x)?;
        trace.push(TracePoint {
            penalty: mid,
            ruin: psi,
        });
        if (psi - req.phi).abs() <= req.tol_phi {
            return Ok(done(mid, solution, psi, iter, true, None, trace));
        }
        if psi > req.phi {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let last = trace.last().copied();
    Err(Error::Numerical(format!(
        "penalty bisection stopped after {} steps without |psi - phi| <= {}: bracket [{lo}, {hi}], last step {:?}",
        trace.len(),
        req.tol_phi,
        last
    )))
}

/// Calibrates `P` and returns the full solution at it.
pub fn solve_constrained(req: &CalibrationRequest) -> Result<CalibrationResult> {
    let result = calibrate_penalty(req)?;
    let psi = result.solution.ruin_probability(req.wealth)?;
    if result.binding && psi > req.phi + req.tol_phi {
        return Err(Error::Numerical(format!(
            "calibrated solution has ruin probability {psi} above phi + tol = {}",
            req.phi + req.tol_phi
        )));
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Regime;

    fn m0() -> MarketParams {
        MarketParams::new(0.02, 0.06, 0.2, 0.04).unwrap()
    }

    fn request(utility: UtilitySpec, phi: f64) -> CalibrationRequest {
        CalibrationRequest::new(m0(), utility, 10.0, phi)
    }

    #[test]
    fn unconstrained_reference_values() {
        assert_eq!(
            unconstrained_ruin(&request(UtilitySpec::power(0.5).unwrap(), 0.0)).unwrap(),
            0.0
        );
        assert_eq!(
            unconstrained_ruin(&request(UtilitySpec::power(2.0).unwrap(), 0.0)).unwrap(),
            1.0
        );
        let s = unconstrained_ruin(&request(
            UtilitySpec::shifted_power(2.0, 1.0, 0.2).unwrap(),
            0.0,
        ))
        .unwrap();
        assert!(s > 0.0 && s < 1.0, "{s}");
    }

    #[test]
    fn slack_target_returns_unconstrained_solution() {
        let util = UtilitySpec::shifted_power(2.0, 1.0, 0.2).unwrap();
        let psi0 = unconstrained_ruin(&request(util.clone(), 0.0)).unwrap();
        let res = calibrate_penalty(&request(util.clone(), psi0)).unwrap();
        assert_eq!((res.penalty, res.binding, res.iterations), (0.0, false, 0));
        assert!(res.warning.is_none());
        let direct = request(util.clone(), 0.0)
            .model()
            .unwrap()
            .solve(0.0)
            .unwrap();
        assert_eq!(res.solution.coefficients(), direct.coefficients());

        let loose = calibrate_penalty(&request(util.clone(), (psi0 + 0.1).min(1.0))).unwrap();
        assert!(!loose.binding && loose.warning.is_some());
        let mut strict = request(util, (psi0 + 0.1).min(1.0));
        strict.strict = true;
        assert!(calibrate_penalty(&strict).is_err());
    }

    #[test]
    fn zero_target_with_finite_utility_floor() {
        let res = calibrate_penalty(&request(
            UtilitySpec::shifted_power(2.0, 1.0, 0.2).unwrap(),
            0.0,
        ))
        .unwrap();
        assert_eq!(res.penalty, -5.0);
        assert_eq!(res.achieved_phi, 0.0);
        assert!(res.binding);
        assert_eq!(res.solution.coefficients().regime, Regime::I);
    }

    #[test]
    fn binding_power_two_target() {
        let res = calibrate_penalty(&request(UtilitySpec::power(2.0).unwrap(), 0.05)).unwrap();
        assert!(res.binding && res.penalty < 0.0);
        assert!(res.iterations <= 200);
        let psi = res.solution.ruin_probability(10.0).unwrap();
        assert!((psi - 0.05).abs() <= 1e-6);
        let mut fine = request(UtilitySpec::power(2.0).unwrap(), 0.05);
        fine.tol_phi = 1e-9;
        let refined = calibrate_penalty(&fine).unwrap();
        assert!((refined.penalty - res.penalty).abs() < 1e-5 * res.penalty.abs());
    }

    #[test]
    fn bisection_trace_is_monotone() {
        let res = calibrate_penalty(&request(
            UtilitySpec::shifted_power(2.0, 1.0, 0.2).unwrap(),
            0.02,
        ))
        .unwrap();
        let mut pts = res.trace.clone();
        pts.sort_by(|a, b| a.penalty.total_cmp(&b.penalty));
        for w in pts.windows(2) {
            assert!(w[1].ruin >= w[0].ruin - 1e-12);
        }
    }

    #[test]
    fn recalibration_is_idempotent() {
        let mut req = request(UtilitySpec::power(2.0).unwrap(), 0.05);
        req.tol_phi = 1e-12;
        let first = calibrate_penalty(&req).unwrap();
        req.phi = first.achieved_phi;
        let second = calibrate_penalty(&req).unwrap();
        assert!((second.penalty - first.penalty).abs() <= 1e-8 * (1.0 + first.penalty.abs()));
    }

    #[test]
    fn invalid_requests_are_rejected() {
        let mut req = request(UtilitySpec::power(2.0).unwrap(), 1.5);
        assert!(matches!(
            calibrate_penalty(&req),
            Err(Error::InvalidParameter(_))
        ));
        req.phi = 0.1;
        req.wealth = 0.0;
        assert!(matches!(
            calibrate_penalty(&req),
            Err(Error::InvalidParameter(_))
        ));
    }
}
