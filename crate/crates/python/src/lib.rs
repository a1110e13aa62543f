//! Python bindings for the `ruinbound` solver.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ruinbound::montecarlo::{self, Payoff, SimConfig, SimEstimate, TabulatedPolicy};
use ruinbound::{CalibrationRequest, Error, MarketParams, Model, PolicySolution, UtilitySpec};

create_exception!(
    ruinbound,
    ModelError,
    PyException,
    "The model assumptions do not hold."
);

fn to_py(err: Error) -> PyErr {
    match err {
        Error::InvalidParameter(m) | Error::Domain(m) => PyValueError::new_err(m),
        Error::Model(m) => ModelError::new_err(m),
        Error::Numerical(m) => PyRuntimeError::new_err(m),
    }
}

/// Market parameters `(r, mu, sigma, beta)`.
#[pyclass(name = "Market", frozen, from_py_object)]
#[derive(Clone)]
struct PyMarket(MarketParams);

#[pymethods]
impl PyMarket {
    #[new]
    fn new(r: f64, mu: f64, sigma: f64, beta: f64) -> PyResult<Self> {
        MarketParams::new(r, mu, sigma, beta)
            .map(PyMarket)
            .map_err(to_py)
    }

    #[getter]
    fn r(&self) -> f64 {
        self.0.r
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.0.mu
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    /// `(lambda_minus, lambda_plus, rho_minus, rho_plus)`.
    fn roots(&self) -> (f64, f64, f64, f64) {
        let r = self.0.roots();
        (r.lambda_minus, r.lambda_plus, r.rho_minus, r.rho_plus)
    }

    fn __repr__(&self) -> String {
        let m = &self.0;
        format!(
            "Market(r={}, mu={}, sigma={}, beta={})",
            m.r, m.mu, m.sigma, m.beta
        )
    }
}

#[pyclass(name = "Utility", frozen, from_py_object)]
#[derive(Clone)]
struct PyUtility(UtilitySpec);

#[pymethods]
impl PyUtility {
    #[staticmethod]
    fn power(p: f64) -> PyResult<Self> {
        UtilitySpec::power(p).map(PyUtility).map_err(to_py)
    }

    #[staticmethod]
    fn log() -> Self {
        PyUtility(UtilitySpec::log())
    }

    #[staticmethod]
    #[pyo3(signature = (p, eta, k = 0.0))]
    fn shifted_power(p: f64, eta: f64, k: f64) -> PyResult<Self> {
        UtilitySpec::shifted_power(p, eta, k)
            .map(PyUtility)
            .map_err(to_py)
    }

    /// Tabulated marginal utility on an increasing consumption grid.
    #[staticmethod]
    #[pyo3(signature = (consumption, marginal, k = 0.0))]
    fn custom(consumption: Vec<f64>, marginal: Vec<f64>, k: f64) -> PyResult<Self> {
        UtilitySpec::custom(&consumption, &marginal, k)
            .map(PyUtility)
            .map_err(to_py)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind_name()
    }

    fn value(&self, c: f64) -> PyResult<f64> {
        self.0.u_value(c).map_err(to_py)
    }

    fn marginal(&self, c: f64) -> PyResult<f64> {
        self.0.u_marginal(c).map_err(to_py)
    }

    fn inverse_marginal(&self, y: f64) -> PyResult<f64> {
        self.0.inverse_marginal(y).map_err(to_py)
    }
}

/// Optimal policy at a fixed bankruptcy penalty.
#[pyclass(name = "Solution", frozen)]
struct PySolution(PolicySolution);

#[pymethods]
impl PySolution {
    #[getter]
    fn penalty(&self) -> f64 {
        self.0.coefficients().penalty
    }

    /// Regime label, `"i"` to `"v"`.
    #[getter]
    fn case(&self) -> &'static str {
        self.0.coefficients().regime.label()
    }

    #[getter]
    fn a(&self) -> f64 {
        self.0.coefficients().a
    }

    #[getter]
    fn b(&self) -> f64 {
        self.0.coefficients().b
    }

    #[getter]
    fn y_bar(&self) -> f64 {
        self.0.coefficients().y_bar
    }

    #[getter]
    fn x_bar(&self) -> f64 {
        self.0.coefficients().x_bar
    }

    fn value(&self, x: f64) -> PyResult<f64> {
        self.0.value(x).map_err(to_py)
    }

    /// `(consumption, investment)` at wealth `x`.
    fn policy(&self, x: f64) -> PyResult<(f64, f64)> {
        self.0.policy(x).map_err(to_py)
    }

    fn ruin_probability(&self, x: f64) -> PyResult<f64> {
        self.0.ruin_probability(x).map_err(to_py)
    }

    fn dual_variable(&self, x: f64) -> PyResult<f64> {
        self.0.dual_variable(x).map_err(to_py)
    }

    fn hjb_residual(&self, x: f64) -> PyResult<f64> {
        self.0.hjb_residual(x).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let c = self.0.coefficients();
        format!(
            "Solution(case={}, penalty={}, a={}, b={}, y_bar={})",
            c.regime, c.penalty, c.a, c.b, c.y_bar
        )
    }
}

#[pyclass(name = "Calibration", frozen, get_all)]
struct PyCalibration {
    penalty: f64,
    achieved_phi: f64,
    iterations: usize,
    binding: bool,
    warning: Option<String>,
    solution: Py<PySolution>,
}

#[pyclass(name = "Estimate", frozen, get_all)]
struct PyEstimate {
    ruin_prob: f64,
    ruin_se: f64,
    ruin_discounted: Option<f64>,
    utility_mean: Option<f64>,
    utility_se: Option<f64>,
    utility_discounted: Option<f64>,
    utility_discounted_se: Option<f64>,
    penalized_value: Option<f64>,
    penalized_se: Option<f64>,
    n_effective: usize,
}

impl From<SimEstimate> for PyEstimate {
    fn from(e: SimEstimate) -> Self {
        PyEstimate {
            ruin_prob: e.ruin_prob,
            ruin_se: e.ruin_se,
            ruin_discounted: e.ruin_discounted,
            utility_mean: e.utility_mean,
            utility_se: e.utility_se,
            utility_discounted: e.utility_discounted,
            utility_discounted_se: e.utility_discounted_se,
            penalized_value: e.penalized_value,
            penalized_se: e.penalized_se,
            n_effective: e.n_effective,
        }
    }
}

/// Solves the penalized problem at penalty `P`.
#[pyfunction]
fn solve(market: PyMarket, utility: PyUtility, penalty: f64) -> PyResult<PySolution> {
    let model = Model::new(market.0, utility.0).map_err(to_py)?;
    model.solve(penalty).map(PySolution).map_err(to_py)
}

/// The penalty separating zero-consumption and floor regimes.
#[pyfunction]
fn pstar(market: PyMarket, utility: PyUtility) -> PyResult<f64> {
    Model::new(market.0, utility.0)
        .and_then(|m| m.pstar())
        .map_err(to_py)
}

/// Ruin probability at wealth `x` with no constraint (`P = 0`).
#[pyfunction]
fn unconstrained_ruin(market: PyMarket, utility: PyUtility, wealth: f64) -> PyResult<f64> {
    ruinbound::unconstrained_ruin(&CalibrationRequest::new(market.0, utility.0, wealth, 0.0))
        .map_err(to_py)
}

/// Finds the penalty whose optimal policy has ruin probability `phi`.
#[pyfunction]
#[pyo3(signature = (market, utility, wealth, phi, tol_phi = 1e-6, max_iter = 200, strict = false))]
#[allow(clippy::too_many_arguments)]
fn calibrate(
    py: Python<'_>,
    market: PyMarket,
    utility: PyUtility,
    wealth: f64,
    phi: f64,
    tol_phi: f64,
    max_iter: usize,
    strict: bool,
) -> PyResult<PyCalibration> {
    let mut req = CalibrationRequest::new(market.0, utility.0, wealth, phi);
    req.tol_phi = tol_phi;
    req.max_iter = max_iter;
    req.strict = strict;
    let res = py
        .detach(|| ruinbound::solve_constrained(&req))
        .map_err(to_py)?;
    Ok(PyCalibration {
        penalty: res.penalty,
        achieved_phi: res.achieved_phi,
        iterations: res.iterations,
        binding: res.binding,
        warning: res.warning,
        solution: Py::new(py, PySolution(res.solution))?,
    })
}

fn sim_config(
    n_paths: usize,
    dt: f64,
    seed: u64,
    t_max: Option<f64>,
    antithetic: bool,
) -> SimConfig {
    SimConfig {
        n_paths,
        dt,
        seed,
        t_max,
        antithetic,
        ..SimConfig::default()
    }
}

/// Simulates wealth under the optimal policy of `solution`.
#[pyfunction]
#[pyo3(signature = (solution, utility, wealth, n_paths = 100_000, dt = 1e-3, seed = 0, t_max = None, antithetic = true))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    solution: &PySolution,
    utility: PyUtility,
    wealth: f64,
    n_paths: usize,
    dt: f64,
    seed: u64,
    t_max: Option<f64>,
    antithetic: bool,
) -> PyResult<PyEstimate> {
    let sol = &solution.0;
    let market = *sol.model().market();
    let cfg = sim_config(n_paths, dt, seed, t_max, antithetic);
    let payoff = Payoff {
        utility: utility.0,
        penalty: sol.coefficients().penalty,
    };
    py.detach(|| {
        let table = TabulatedPolicy::from_solution(sol, wealth)?;
        montecarlo::simulate_primal(&table, wealth, &market, Some(&payoff), &cfg)
    })
    .map(PyEstimate::from)
    .map_err(to_py)
}

/// Simulates the dual process from `y0` to the bankruptcy level `y_bar`.
#[pyfunction]
#[pyo3(signature = (y0, y_bar, market, n_paths = 100_000, dt = 1e-3, seed = 0, t_max = None, antithetic = true))]
#[allow(clippy::too_many_arguments)]
fn simulate_dual(
    py: Python<'_>,
    y0: f64,
    y_bar: f64,
    market: PyMarket,
    n_paths: usize,
    dt: f64,
    seed: u64,
    t_max: Option<f64>,
    antithetic: bool,
) -> PyResult<PyEstimate> {
    let cfg = sim_config(n_paths, dt, seed, t_max, antithetic);
    py.detach(|| montecarlo::simulate_dual(y0, y_bar, &market.0, &cfg))
        .map(PyEstimate::from)
        .map_err(to_py)
}

#[pymodule]
#[pyo3(name = "ruinbound")]
fn ruinbound_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMarket>()?;
    m.add_class::<PyUtility>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyCalibration>()?;
    m.add_class::<PyEstimate>()?;
    m.add("ModelError", m.py().get_type::<ModelError>())?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(pstar, m)?)?;
    m.add_function(wrap_pyfunction!(unconstrained_ruin, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_dual, m)?)?;
    Ok(())
}
