//! Python bindings: parameter records, simulation, fluctuation analysis,
//! transition paths and the control problem.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sysrisk::control;
use sysrisk::fluctuations;
use sysrisk::ldp::{self, optimality, InitialGuess};
use sysrisk::potential::V;
use sysrisk::sde;

create_exception!(pysysrisk, SysriskError, PyException);
create_exception!(pysysrisk, NonConvergenceError, SysriskError);

fn to_py(e: sysrisk::Error) -> PyErr {
    match e {
        sysrisk::Error::Syntax { .. } | sysrisk::Error::Config { .. } | sysrisk::Error::InvalidArgument(_) => {
            PyValueError::new_err(e.to_string())
        }
        sysrisk::Error::NonConvergence(_) | sysrisk::Error::Continuation { .. } => {
            NonConvergenceError::new_err(e.to_string())
        }
        _ => SysriskError::new_err(e.to_string()),
    }
}

trait IntoPyResult<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPyResult<T> for sysrisk::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

#[pyclass(name = "ModelParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModelParams(sysrisk::ModelParams);

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (h0, sigma, theta0, theta, sigma0 = 0.0, h = 0.0, n_agents = 100))]
    fn new(h0: f64, sigma: f64, theta0: f64, theta: f64, sigma0: f64, h: f64, n_agents: usize) -> PyResult<Self> {
        sysrisk::ModelParams::new(h0, h, sigma0, sigma, theta0, theta, n_agents)
            .py()
            .map(Self)
    }

    #[getter]
    fn h0(&self) -> f64 {
        self.0.h0
    }
    #[getter]
    fn h(&self) -> f64 {
        self.0.h
    }
    #[getter]
    fn sigma0(&self) -> f64 {
        self.0.sigma0
    }
    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma
    }
    #[getter]
    fn theta0(&self) -> f64 {
        self.0.theta0
    }
    #[getter]
    fn theta(&self) -> f64 {
        self.0.theta
    }
    #[getter]
    fn n_agents(&self) -> usize {
        self.0.n_agents
    }

    fn with_h0(&self, h0: f64) -> PyResult<Self> {
        let p = self.0.with_h0(h0);
        p.validate().py()?;
        Ok(Self(p))
    }

    fn __repr__(&self) -> String {
        let p = &self.0;
        format!(
            "ModelParams(h0={}, sigma={}, theta0={}, theta={}, sigma0={}, h={}, n_agents={})",
            p.h0, p.sigma, p.theta0, p.theta, p.sigma0, p.h, p.n_agents
        )
    }
}

#[pyclass(name = "SimConfig", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySimConfig(sysrisk::SimConfig);

#[pymethods]
impl PySimConfig {
    #[new]
    #[pyo3(signature = (t_final, dt, seed = 0))]
    fn new(t_final: f64, dt: f64, seed: u64) -> PyResult<Self> {
        sysrisk::SimConfig::new(t_final, dt, seed).py().map(Self)
    }
    #[getter]
    fn t_final(&self) -> f64 {
        self.0.t_final
    }
    #[getter]
    fn dt(&self) -> f64 {
        self.0.dt
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }
    fn n_steps(&self) -> usize {
        self.0.n_steps()
    }
    fn burn_in_steps(&self) -> usize {
        self.0.burn_in_steps()
    }
    fn __repr__(&self) -> String {
        format!("SimConfig(t_final={}, dt={}, seed={})", self.0.t_final, self.0.dt, self.0.seed)
    }
}

#[pyclass(name = "ControlParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyControlParams(sysrisk::ControlParams);

#[pymethods]
impl PyControlParams {
    #[new]
    fn new(theta_c: f64, h_cap0: f64, horizon: f64) -> PyResult<Self> {
        sysrisk::ControlParams::new(theta_c, h_cap0, horizon).py().map(Self)
    }
    #[getter]
    fn theta_c(&self) -> f64 {
        self.0.theta_c
    }
    #[getter]
    fn h_cap0(&self) -> f64 {
        self.0.h_cap0
    }
    #[getter]
    fn horizon(&self) -> f64 {
        self.0.horizon
    }
    fn __repr__(&self) -> String {
        format!(
            "ControlParams(theta_c={}, h_cap0={}, horizon={})",
            self.0.theta_c, self.0.h_cap0, self.0.horizon
        )
    }
}

/// Time grid with named series.
#[pyclass(name = "PathGrid", frozen, skip_from_py_object)]
struct PyPathGrid(sysrisk::PathGrid);

#[pymethods]
impl PyPathGrid {
    #[getter]
    fn t(&self) -> Vec<f64> {
        self.0.t().to_vec()
    }
    fn names(&self) -> Vec<String> {
        self.0.names().map(str::to_owned).collect()
    }
    fn series(&self, name: &str) -> PyResult<Vec<f64>> {
        self.0.series(name).py().map(<[f64]>::to_vec)
    }
    fn to_csv(&self) -> String {
        self.0.to_csv()
    }
    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "BvpSolution", frozen, skip_from_py_object)]
struct PyBvpSolution(ldp::BvpSolution);

#[pymethods]
impl PyBvpSolution {
    #[getter]
    fn grid(&self) -> PyPathGrid {
        PyPathGrid(self.0.grid.clone())
    }
    #[getter]
    fn rate_value(&self) -> f64 {
        self.0.rate_value
    }
    #[getter]
    fn converged(&self) -> bool {
        self.0.converged
    }
    #[getter]
    fn newton_iterations(&self) -> usize {
        self.0.newton_iterations
    }
    #[getter]
    fn ode_residual_norm(&self) -> f64 {
        self.0.ode_residual_norm
    }
    fn __repr__(&self) -> String {
        format!(
            "BvpSolution(rate_value={}, converged={}, newton_iterations={})",
            self.0.rate_value, self.0.converged, self.0.newton_iterations
        )
    }
}

/// `(V, V', V'')` of the double well `x^4/4 - x^2/2`.
#[pyfunction]
fn potential(x: f64) -> (f64, f64, f64) {
    (V.value(x), V.d1(x), V.d2(x))
}

#[pyfunction]
fn parse_config(text: &str) -> PyResult<(PyModelParams, PySimConfig, Option<PyControlParams>)> {
    let (m, s, c) = sysrisk::parse_config(text).py()?;
    Ok((PyModelParams(m), PySimConfig(s), c.map(PyControlParams)))
}

#[pyfunction]
fn simulate_reduced(params: &PyModelParams, cfg: &PySimConfig) -> PyResult<PyPathGrid> {
    sde::simulate_reduced(&params.0, &cfg.0).py().map(PyPathGrid)
}

/// Controlled run using the stationary feedback of `ctrl`.
#[pyfunction]
fn simulate_controlled(params: &PyModelParams, cfg: &PySimConfig, ctrl: &PyControlParams) -> PyResult<PyPathGrid> {
    let steady = control::solve_algebraic_riccati(&params.0, &ctrl.0).py()?;
    let law = control::build_feedback(&steady, ctrl.0.theta_c).py()?;
    sde::simulate_controlled(&params.0, &cfg.0, &law).py().map(PyPathGrid)
}

#[pyfunction]
#[pyo3(signature = (x, band = 0.5))]
fn count_transitions(x: Vec<f64>, band: f64) -> usize {
    sysrisk::stats::count_transitions(&x, band)
}

#[pyfunction]
#[pyo3(signature = (params, y0e = -1.0))]
fn stationary_covariance<'py>(py: Python<'py>, params: &PyModelParams, y0e: f64) -> PyResult<Bound<'py, PyDict>> {
    let r = fluctuations::stationary_covariance(&params.0, y0e).py()?;
    let d = PyDict::new(py);
    d.set_item("var_z0", r.var_z0)?;
    d.set_item("var_zbar", r.var_zbar)?;
    d.set_item("cov", r.cov)?;
    d.set_item("limit_var_z0", r.limit_var_z0)?;
    d.set_item("limit_var_zbar", r.limit_var_zbar)?;
    d.set_item("limit_cov", r.limit_cov)?;
    Ok(d)
}

fn guess(name: &str) -> PyResult<InitialGuess> {
    match name {
        "auto" => Ok(InitialGuess::Auto),
        "constant" => Ok(InitialGuess::ConstantMinusOne),
        "straight" => Ok(InitialGuess::StraightLine),
        other => Err(PyValueError::new_err(format!(
            "unknown initial guess `{other}` (auto, constant, straight)"
        ))),
    }
}

/// Most probable transition path; the noise case follows from `sigma0`.
#[pyfunction]
#[pyo3(signature = (params, t_final, mesh_points = 2000, initial_guess = "auto"))]
fn solve_bvp(params: &PyModelParams, t_final: f64, mesh_points: usize, initial_guess: &str) -> PyResult<PyBvpSolution> {
    let g = guess(initial_guess)?;
    ldp::NoiseCase::of(&params.0)
        .solve(&params.0, t_final, mesh_points, &g, &ldp::BvpOptions::default())
        .py()
        .map(PyBvpSolution)
}

#[pyfunction]
#[pyo3(signature = (params, t_final, schedule, mesh_points = 2000))]
fn continue_in_h0(
    params: &PyModelParams,
    t_final: f64,
    schedule: Vec<f64>,
    mesh_points: usize,
) -> PyResult<Vec<PyBvpSolution>> {
    let sols = ldp::continue_in_h0(&params.0, t_final, &schedule, mesh_points).py()?;
    Ok(sols.into_iter().map(PyBvpSolution).collect())
}

#[pyfunction]
fn closed_form_rate_h0_zero(params: &PyModelParams, t_final: f64) -> f64 {
    ldp::closed_form_rate_h0_zero(&params.0, t_final)
}

#[pyfunction]
fn large_t_rate(params: &PyModelParams, t_final: f64) -> f64 {
    ldp::large_t_rate(&params.0, t_final)
}

/// `log p = -N I`, never exponentiated.
#[pyfunction]
fn log_transition_probability(rate_infimum: f64, n_agents: usize) -> PyResult<f64> {
    ldp::transition_probability(rate_infimum, n_agents)
        .py()
        .map(|e| e.log_probability)
}

/// Largest relative directional derivative over random admissible
/// perturbations, and whether it is below `tolerance`.
#[pyfunction]
#[pyo3(signature = (solution, params, n_directions = 20, seed = 0, tolerance = optimality::DEFAULT_TOLERANCE))]
fn check_optimality(
    solution: &PyBvpSolution,
    params: &PyModelParams,
    n_directions: usize,
    seed: u64,
    tolerance: f64,
) -> PyResult<(f64, bool)> {
    let r = optimality::check_optimality(
        &solution.0,
        &params.0,
        n_directions,
        seed,
        optimality::DEFAULT_EPSILON,
        tolerance,
    )
    .py()?;
    Ok((r.max_relative_derivative, r.passed))
}

#[pyfunction]
fn solve_algebraic_riccati<'py>(
    py: Python<'py>,
    params: &PyModelParams,
    ctrl: &PyControlParams,
) -> PyResult<Bound<'py, PyDict>> {
    let s = control::solve_algebraic_riccati(&params.0, &ctrl.0).py()?;
    let d = PyDict::new(py);
    d.set_item("a_inf", s.a_inf)?;
    d.set_item("b_inf", s.b_inf)?;
    d.set_item("d_inf", s.d_inf)?;
    d.set_item("e_inf", s.e_inf)?;
    d.set_item("converged", s.converged)?;
    Ok(d)
}

/// Backward RK4 solution on `[0, horizon]` with series `a, b, d, e`.
#[pyfunction]
fn integrate_riccati(params: &PyModelParams, ctrl: &PyControlParams, dt: f64) -> PyResult<PyPathGrid> {
    control::integrate_riccati(&params.0, &ctrl.0, dt)
        .py()
        .map(|t| PyPathGrid(t.grid))
}

#[pyfunction]
fn d_inf_closed_form(theta: f64, theta_c: f64) -> f64 {
    control::d_inf_closed_form(theta, theta_c)
}

#[pymodule]
fn pysysrisk(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SysriskError", m.py().get_type::<SysriskError>())?;
    m.add("NonConvergenceError", m.py().get_type::<NonConvergenceError>())?;
    m.add_class::<PyModelParams>()?;
    m.add_class::<PySimConfig>()?;
    m.add_class::<PyControlParams>()?;
    m.add_class::<PyPathGrid>()?;
    m.add_class::<PyBvpSolution>()?;
    m.add_function(wrap_pyfunction!(potential, m)?)?;
    m.add_function(wrap_pyfunction!(parse_config, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_reduced, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_controlled, m)?)?;
    m.add_function(wrap_pyfunction!(count_transitions, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(solve_bvp, m)?)?;
    m.add_function(wrap_pyfunction!(continue_in_h0, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_rate_h0_zero, m)?)?;
    m.add_function(wrap_pyfunction!(large_t_rate, m)?)?;
    m.add_function(wrap_pyfunction!(log_transition_probability, m)?)?;
    m.add_function(wrap_pyfunction!(check_optimality, m)?)?;
    m.add_function(wrap_pyfunction!(solve_algebraic_riccati, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_riccati, m)?)?;
    m.add_function(wrap_pyfunction!(d_inf_closed_form, m)?)?;
    Ok(())
}
