//! Invariant suite run by the `check` command.

use serde::Serialize;

use crate::dual::{PolicySolution, Regime};
use crate::error::Result;

/// Outcome of one invariant check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub max_error: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    fn new(name: &'static str, max_error: f64, tolerance: f64) -> Self {
        CheckOutcome {
            name,
            passed: max_error <= tolerance,
            max_error,
            tolerance,
        }
    }
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let mut grid: Vec<f64> = (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect();
    grid[0] = lo;
    grid[n - 1] = hi;
    grid
}

/// `γλ² − (r−β−γ)λ − r = 0` scaled by `max(1, γλ²)`, and `ρ = 1 + λ`.
pub fn check_roots(solution: &PolicySolution) -> CheckOutcome {
    let model = solution.model();
    let m = model.market();
    let rs = model.roots();
    let mut worst = 0.0f64;
    for (l, rho) in [
        (rs.lambda_plus, rs.rho_plus),
        (rs.lambda_minus, rs.rho_minus),
    ] {
        let res = rs.gamma * l * l - (m.r - m.beta - rs.gamma) * l - m.r;
        worst = worst.max(res.abs() / (rs.gamma * l * l).max(1.0));
        if rho != 1.0 + l {
            worst = f64::INFINITY;
        }
    }
    CheckOutcome::new("roots", worst, 1e-12)
}

/// `|𝒴(𝒳(y)) − y|/y` over 200 dual points.
pub fn check_inversion(solution: &PolicySolution, wealth: f64) -> Result<CheckOutcome> {
    let model = solution.model();
    let c = solution.coefficients();
    let ys = if c.y_bar.is_finite() {
        log_grid(c.y_bar * 1e-6, c.y_bar * (1.0 - 1e-3), 200)
    } else {
        let y = solution.dual_variable(wealth)?;
        log_grid(y * 1e-3, y * 1e3, 200)
    };
    let mut worst = 0.0f64;
    for y in ys {
        let x = model.chi(y, c.a, c.b)?;
        let back = model.invert_chi(x, c.a, c.b)?;
        worst = worst.max((back - y).abs() / y);
    }
    Ok(CheckOutcome::new("inversion", worst, 1e-9))
}

/// HJB residual scaled by `1 + |V|` on 50 wealth points in `[x/100, 100x]`.
pub fn check_hjb(solution: &PolicySolution, wealth: f64) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for x in log_grid(wealth / 100.0, wealth * 100.0, 50) {
        let t = solution.hjb_terms(x)?;
        worst = worst.max(t.residual().abs() / (1.0 + t.value.abs()));
    }
    Ok(CheckOutcome::new("hjb", worst, 1e-6))
}

/// Ruin ODE residual relative to `ψ̂` at 20 points below `ȳ`.
pub fn check_ruin_ode(solution: &PolicySolution) -> Result<CheckOutcome> {
    let model = solution.model();
    let m = model.market();
    let curve = solution.ruin_curve();
    let mut worst = 0.0f64;
    if curve.y_bar.is_finite() {
        for y in log_grid(curve.y_bar * 1e-4, curve.y_bar, 20) {
            let res = curve.ode_residual(y, m.beta, m.r, model.roots().gamma)?;
            worst = worst.max(res.abs() / curve.psi_hat(y)?);
        }
    }
    Ok(CheckOutcome::new("ruin_ode", worst, 1e-10))
}

/// Central-difference `V′(x)` against `𝒴(x)` on 20 points in `[x/10, 10x]`.
pub fn check_duality(solution: &PolicySolution, wealth: f64) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for x in log_grid(wealth / 10.0, wealth * 10.0, 20) {
        let h = 1e-4 * x;
        let dv = (solution.value(x + h)? - solution.value(x - h)?) / (2.0 * h);
        let y = solution.dual_variable(x)?;
        worst = worst.max((dv - y).abs() / y);
    }
    Ok(CheckOutcome::new("duality", worst, 1e-6))
}

/// Largest decrease of `ψ(x; P)` along an increasing penalty grid.
pub fn check_monotone_in_penalty(
    solution: &PolicySolution,
    wealth: f64,
    grid: &[f64],
) -> Result<CheckOutcome> {
    let model = solution.model();
    let mut worst = 0.0f64;
    let mut prev = f64::NEG_INFINITY;
    for &p in grid {
        let psi = model.solve(p)?.ruin_probability(wealth)?;
        worst = worst.max(prev - psi);
        prev = psi;
    }
    Ok(CheckOutcome::new("monotone_in_penalty", worst, 1e-10))
}

/// In regime iii, no consumption at or below `x̄` and some above it.
pub fn check_zero_consumption(solution: &PolicySolution) -> Result<CheckOutcome> {
    let c = solution.coefficients();
    let mut failures = 0.0;
    if c.regime == Regime::III {
        for k in 0..=20 {
            let x = c.x_bar * k as f64 / 20.0 * (1.0 - 1e-9);
            if solution.policy(x)?.0 != 0.0 {
                failures += 1.0;
            }
        }
        for f in [1.01, 1.5, 3.0, 10.0] {
            if !(solution.policy(c.x_bar * f)?.0 > 0.0) {
                failures += 1.0;
            }
        }
    }
    Ok(CheckOutcome::new(
        "zero_consumption_threshold",
        failures,
        0.0,
    ))
}

/// Runs every check for the solution at initial wealth `wealth`.
pub fn run_checks(
    solution: &PolicySolution,
    wealth: f64,
    penalty_grid: &[f64],
) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        check_roots(solution),
        check_inversion(solution, wealth)?,
        check_hjb(solution, wealth)?,
        check_ruin_ode(solution)?,
        check_duality(solution, wealth)?,
        check_monotone_in_penalty(solution, wealth, penalty_grid)?,
        check_zero_consumption(solution)?,
    ])
}
