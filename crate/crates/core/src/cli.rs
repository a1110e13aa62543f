//! Workflows behind the command-line tool, and their output encoding.

use std::fmt::Write as _;

use crate::calibrate::{calibrate_penalty, CalibrationRequest};
use crate::check::{log_grid, run_checks};
use crate::config::{Format, PenaltyChoice, RunConfig};
use crate::dual::{Model, PolicySolution, Tolerances};
use crate::error::{Error, Result};
use crate::montecarlo::{simulate_primal, Payoff, TabulatedPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Policy,
    Frontier,
    Simulate,
    Check,
}

/// One output value.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl Cell {
    /// Finite numbers as numbers; infinities as the strings `"inf"`/`"-inf"`.
    fn extended(v: f64) -> Cell {
        if v.is_infinite() {
            Cell::Text(if v > 0.0 { "inf" } else { "-inf" }.into())
        } else {
            Cell::Num(v)
        }
    }
}

pub type Record = Vec<(&'static str, Cell)>;

/// Command result: a single record or a table of records.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub records: Vec<Record>,
    pub table: bool,
    /// Set by `check` when any invariant failed.
    pub failed: bool,
    pub warnings: Vec<String>,
}

impl Output {
    pub fn render(&self, format: Format) -> Result<String> {
        for rec in &self.records {
            for (k, c) in rec {
                if let Cell::Num(v) = c {
                    if !v.is_finite() {
                        return Err(Error::Numerical(format!(
                            "non-finite output value for {k}: {v}"
                        )));
                    }
                }
            }
        }
        Ok(match format {
            Format::Json => self.json(),
            Format::Csv => self.csv(),
        })
    }

    fn json(&self) -> String {
        let object = |rec: &Record| {
            let fields: Vec<String> = rec
                .iter()
                .map(|(k, c)| {
                    let v = match c {
                        Cell::Num(v) => serde_json::to_string(v),
                        Cell::Int(v) => serde_json::to_string(v),
                        Cell::Bool(v) => serde_json::to_string(v),
                        Cell::Text(v) => serde_json::to_string(v),
                    };
                    format!("{}:{}", serde_json::to_string(k).unwrap(), v.unwrap())
                })
                .collect();
            format!("{{{}}}", fields.join(","))
        };
        if self.table {
            let rows: Vec<String> = self.records.iter().map(object).collect();
            format!("[{}]\n", rows.join(",\n"))
        } else {
            format!("{}\n", object(&self.records[0]))
        }
    }

    fn csv(&self) -> String {
        let mut out = String::new();
        if let Some(first) = self.records.first() {
            let header: Vec<&str> = first.iter().map(|(k, _)| *k).collect();
            out.push_str(&header.join(","));
            out.push('\n');
        }
        for rec in &self.records {
            let row: Vec<String> = rec
                .iter()
                .map(|(_, c)| match c {
                    Cell::Num(v) => format!("{v:.16e}"),
                    Cell::Int(v) => v.to_string(),
                    Cell::Bool(v) => v.to_string(),
                    Cell::Text(v) => v.clone(),
                })
                .collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Penalty, solution and calibration metadata for a configured instance.
#[derive(Debug, Clone)]
pub struct Solved {
    pub solution: PolicySolution,
    pub penalty: f64,
    pub achieved_phi: f64,
    pub binding: bool,
    pub calibrated: bool,
    pub iterations: usize,
    pub warning: Option<String>,
}

pub fn model_for(cfg: &RunConfig) -> Result<Model> {
    let tol = Tolerances {
        root_rel: cfg.tol_root,
        ..Tolerances::default()
    };
    Ok(Model::new(cfg.market, cfg.utility.clone())?.with_tolerances(tol))
}

/// Calibrates `P` to `phi`, or solves at the configured penalty.
pub fn solve_instance(cfg: &RunConfig) -> Result<Solved> {
    if let Some(choice) = cfg.penalty {
        let model = model_for(cfg)?;
        let penalty = match choice {
            PenaltyChoice::Value(p) => p,
            PenaltyChoice::Pstar => model.pstar()?,
        };
        let solution = model.solve(penalty)?;
        let psi = solution.ruin_probability(cfg.wealth)?;
        return Ok(Solved {
            binding: solution.coefficients().is_constrained(),
            solution,
            penalty,
            achieved_phi: psi,
            calibrated: false,
            iterations: 0,
            warning: None,
        });
    }
    let mut req = CalibrationRequest::new(cfg.market, cfg.utility.clone(), cfg.wealth, cfg.phi);
    req.tol_phi = cfg.tol_phi;
    req.max_iter = cfg.max_iter;
    req.strict = cfg.strict;
    req.tolerances.root_rel = cfg.tol_root;
    let res = calibrate_penalty(&req)?;
    Ok(Solved {
        solution: res.solution,
        penalty: res.penalty,
        achieved_phi: res.achieved_phi,
        binding: res.binding,
        calibrated: true,
        iterations: res.iterations,
        warning: res.warning,
    })
}

/// Default penalty grid: linear on `[U(0)/β, 0]` when `U(0)` is finite,
/// otherwise geometric from `−10⁶` to `−10⁻³`; always kept below
/// `lim U/β`.
pub fn penalty_grid(
    model: &Model,
    n: usize,
    range: (Option<f64>, Option<f64>),
) -> Result<Vec<f64>> {
    let floor = model.penalty_floor();
    let ceiling = model.penalty_ceiling();
    let mut hi = range
        .1
        .unwrap_or(if floor.is_finite() { 0.0 } else { -1e-3 });
    if hi >= ceiling {
        hi = ceiling - 1e-6 * (1.0 + ceiling.abs());
    }
    let mut lo = range
        .0
        .unwrap_or(if floor.is_finite() { floor } else { -1e6 });
    if lo >= hi {
        if range.0.is_some() {
            return Err(crate::error::invalid(format!(
                "frontier range is empty: [{lo}, {hi}]"
            )));
        }
        lo = hi - 10.0;
    }
    if lo < 0.0 && hi < 0.0 && !floor.is_finite() && range.0.is_none() && range.1.is_none() {
        return Ok(log_grid(-lo, -hi, n).into_iter().map(|v| -v).collect());
    }
    Ok((0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect())
}

fn solve_record(cfg: &RunConfig, s: &Solved) -> Result<Record> {
    let c = s.solution.coefficients();
    let p = s.solution.evaluate(cfg.wealth)?;
    Ok(vec![
        ("wealth", Cell::Num(cfg.wealth)),
        ("phi", Cell::Num(cfg.phi)),
        ("P", Cell::Num(s.penalty)),
        ("case", Cell::Text(c.regime.label().into())),
        ("a", Cell::Num(c.a)),
        ("B", Cell::Num(c.b)),
        ("y_bar", Cell::extended(c.y_bar)),
        ("x_bar", Cell::Num(c.x_bar)),
        ("V", Cell::Num(p.value)),
        ("c", Cell::Num(p.consumption)),
        ("pi", Cell::Num(p.investment)),
        ("psi", Cell::Num(p.ruin)),
        ("binding", Cell::Bool(s.binding)),
        ("calibrated", Cell::Bool(s.calibrated)),
        ("iterations", Cell::Int(s.iterations as u64)),
    ])
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Output> {
    let single = |rec: Record, warnings: Vec<String>| Output {
        records: vec![rec],
        table: false,
        failed: false,
        warnings,
    };
    match command {
        Command::Solve => {
            let s = solve_instance(cfg)?;
            Ok(single(
                solve_record(cfg, &s)?,
                s.warning.into_iter().collect(),
            ))
        }
        Command::Policy => {
            let s = solve_instance(cfg)?;
            let mut records = Vec::with_capacity(cfg.policy_points);
            for x in log_grid(cfg.wealth / 100.0, cfg.wealth * 100.0, cfg.policy_points) {
                let p = s.solution.evaluate(x)?;
                records.push(vec![
                    ("x", Cell::Num(x)),
                    ("V", Cell::Num(p.value)),
                    ("c", Cell::Num(p.consumption)),
                    ("pi", Cell::Num(p.investment)),
                    ("psi", Cell::Num(p.ruin)),
                ]);
            }
            Ok(Output {
                records,
                table: true,
                failed: false,
                warnings: s.warning.into_iter().collect(),
            })
        }
        Command::Frontier => {
            let model = model_for(cfg)?;
            let mut records = Vec::with_capacity(cfg.frontier_points);
            for p in penalty_grid(&model, cfg.frontier_points, cfg.frontier_range)? {
                let sol = model.solve(p)?;
                let pt = sol.evaluate(cfg.wealth)?;
                records.push(vec![
                    ("P", Cell::Num(p)),
                    ("case", Cell::Text(sol.coefficients().regime.label().into())),
                    ("psi", Cell::Num(pt.ruin)),
                    ("V", Cell::Num(pt.value)),
                ]);
            }
            Ok(Output {
                records,
                table: true,
                failed: false,
                warnings: Vec::new(),
            })
        }
        Command::Simulate => {
            let s = solve_instance(cfg)?;
            let table = TabulatedPolicy::from_solution(&s.solution, cfg.wealth)?;
            let payoff = Payoff {
                utility: cfg.utility.clone(),
                penalty: s.penalty,
            };
            let est = simulate_primal(&table, cfg.wealth, &cfg.market, Some(&payoff), &cfg.sim)?;
            let psi = s.solution.ruin_probability(cfg.wealth)?;
            let value = s.solution.value(cfg.wealth)?;
            let opt = |v: Option<f64>| Cell::Num(v.unwrap_or(f64::NAN));
            let rec = vec![
                ("wealth", Cell::Num(cfg.wealth)),
                ("P", Cell::Num(s.penalty)),
                (
                    "case",
                    Cell::Text(s.solution.coefficients().regime.label().into()),
                ),
                ("psi", Cell::Num(psi)),
                ("V", Cell::Num(value)),
                ("ruin_prob", Cell::Num(est.ruin_prob)),
                ("ruin_se", Cell::Num(est.ruin_se)),
                ("ruin_discounted", opt(est.ruin_discounted)),
                ("ruin_discounted_se", opt(est.ruin_discounted_se)),
                ("utility_mean", opt(est.utility_mean)),
                ("utility_se", opt(est.utility_se)),
                ("utility_discounted", opt(est.utility_discounted)),
                ("utility_discounted_se", opt(est.utility_discounted_se)),
                ("penalized_value", opt(est.penalized_value)),
                ("penalized_se", opt(est.penalized_se)),
                ("n_effective", Cell::Int(est.n_effective as u64)),
                ("seed", Cell::Int(cfg.sim.seed)),
                ("dt", Cell::Num(cfg.sim.dt)),
            ];
            Ok(single(rec, s.warning.into_iter().collect()))
        }
        Command::Check => {
            let s = solve_instance(cfg)?;
            let model = s.solution.model();
            let grid = penalty_grid(model, cfg.frontier_points, cfg.frontier_range)?;
            let outcomes = run_checks(&s.solution, cfg.wealth, &grid)?;
            let failed = outcomes.iter().any(|o| !o.passed);
            let records = outcomes
                .into_iter()
                .map(|o| {
                    vec![
                        ("check", Cell::Text(o.name.into())),
                        ("passed", Cell::Bool(o.passed)),
                        ("max_error", Cell::Num(o.max_error)),
                        ("tolerance", Cell::Num(o.tolerance)),
                    ]
                })
                .collect();
            Ok(Output {
                records,
                table: true,
                failed,
                warnings: s.warning.into_iter().collect(),
            })
        }
    }
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter(_) => 1,
        Error::Model(_) => 2,
        Error::Numerical(_) | Error::Domain(_) => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_seventeen_significant_digits() {
        let out = Output {
            records: vec![vec![
                ("x", Cell::Num(0.1)),
                ("n", Cell::Int(3)),
                ("y_bar", Cell::extended(f64::INFINITY)),
            ]],
            table: false,
            failed: false,
            warnings: vec![],
        };
        assert_eq!(
            out.render(Format::Csv).unwrap(),
            "x,n,y_bar\n1.0000000000000001e-1,3,inf\n"
        );
        assert_eq!(
            out.render(Format::Json).unwrap(),
            "{\"x\":0.1,\"n\":3,\"y_bar\":\"inf\"}\n"
        );
    }

    #[test]
    fn non_finite_numbers_are_refused() {
        let out = Output {
            records: vec![vec![("x", Cell::Num(f64::NAN))]],
            table: false,
            failed: false,
            warnings: vec![],
        };
        assert!(out.render(Format::Json).is_err());
    }
}
