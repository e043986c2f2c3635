//! Python bindings: problems, flows, the integrator, LP solvers and the
//! control example, returning plain lists and floats.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use saddleflow::certificates::{trajectory_monitor, CertificateKind, LyapunovReference};
use saddleflow::control::{build_lp, run_example_case, ControlProblem, ControlSolution};
use saddleflow::flows::{
    plain_field, project, projected_field, projected_regularized_field, proximal_field, regularized_field,
    RegularizationConfig, VectorField, PROX_DEFAULT_TOL,
};
use saddleflow::integrate::{integrate, IntegratorConfig, Scheme, StopKind, StopReason, Trajectory};
use saddleflow::lp::{self, LinearProgram, LpSolution, ReferenceOutcome};
use saddleflow::problem::{builtin, ConvexityClass, PointPair, SharedProblem, BUILTIN_NAMES};
use saddleflow::SaddleError;

fn value_err(e: SaddleError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn integrator(scheme: &str, dt: f64, t_max: f64, tol: f64, stride: usize) -> PyResult<IntegratorConfig> {
    let cfg = IntegratorConfig {
        scheme: scheme.parse::<Scheme>().map_err(value_err)?,
        dt,
        t_max,
        conv_tol: tol,
        record_stride: stride,
        ..Default::default()
    };
    cfg.validate().map_err(value_err)?;
    Ok(cfg)
}

/// A recorded run: sample times, states, residuals and, when a reference
/// saddle is known, the Lyapunov value and certificate components.
#[pyclass(name = "Trajectory", module = "saddleflow", frozen)]
struct PyTrajectory {
    traj: Trajectory,
    stop: StopReason,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.traj.times.clone()
    }

    #[getter]
    fn states(&self) -> Vec<Vec<f64>> {
        self.traj.states.clone()
    }

    #[getter]
    fn residuals(&self) -> Vec<f64> {
        self.traj.residuals.clone()
    }

    #[getter]
    fn lyapunov(&self) -> Option<Vec<f64>> {
        self.traj.aux.as_ref().map(|a| a.iter().map(|s| s.lyapunov).collect())
    }

    /// `(h1, h2)` per sample.
    #[getter]
    fn certificate(&self) -> Option<Vec<(f64, f64)>> {
        self.traj.aux.as_ref().map(|a| a.iter().map(|s| (s.h1, s.h2)).collect())
    }

    #[getter]
    fn columns(&self) -> Vec<String> {
        self.traj.layout.column_names()
    }

    /// One of `converged`, `horizon-reached`, `diverged`, `inner-failure`.
    #[getter]
    fn stop(&self) -> String {
        self.stop.kind.to_string()
    }

    #[getter]
    fn stop_detail(&self) -> String {
        self.stop.detail.clone()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.stop.kind == StopKind::Converged
    }

    #[getter]
    fn final_state(&self) -> Vec<f64> {
        self.traj.final_state().unwrap_or_default().to_vec()
    }

    fn __len__(&self) -> usize {
        self.traj.len()
    }

    fn __repr__(&self) -> String {
        format!("Trajectory(samples={}, stop={})", self.traj.len(), self.stop)
    }
}

/// `min cᵀx  s.t.  Ax ≤ b`.
#[pyclass(name = "LinearProgram", module = "saddleflow", frozen)]
struct PyLinearProgram {
    lp: LinearProgram,
}

#[pymethods]
impl PyLinearProgram {
    /// `a` is given as a list of rows.
    #[new]
    fn new(c: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<f64>) -> PyResult<Self> {
        let lp = LinearProgram::from_rows(c, &a, b).map_err(value_err)?;
        Ok(Self { lp })
    }

    /// Parses the plain-text format: `n m`, then `c`, then one `a_j b_j` row per constraint.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            lp: text.parse().map_err(value_err)?,
        })
    }

    fn to_text(&self) -> String {
        self.lp.to_text()
    }

    #[getter]
    fn n(&self) -> usize {
        self.lp.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.lp.m()
    }

    fn objective(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.lp.n() {
            return Err(PyValueError::new_err(format!(
                "expected {} values, got {}",
                self.lp.n(),
                x.len()
            )));
        }
        Ok(self.lp.objective(&x))
    }

    fn __repr__(&self) -> String {
        format!("LinearProgram(n={}, m={})", self.lp.n(), self.lp.m())
    }
}

/// Result of a flow-based LP solve.
#[pyclass(name = "LpSolution", module = "saddleflow", frozen)]
struct PyLpSolution {
    #[pyo3(get)]
    x: Vec<f64>,
    #[pyo3(get)]
    y: Vec<f64>,
    #[pyo3(get)]
    objective: f64,
    #[pyo3(get)]
    converged: bool,
    /// Stationarity, dual infeasibility, primal infeasibility, complementarity.
    #[pyo3(get)]
    kkt: (f64, f64, f64, f64),
    #[pyo3(get)]
    diagnosis: Option<String>,
    #[pyo3(get)]
    trajectory: Py<PyTrajectory>,
}

fn lp_solution(py: Python<'_>, lp: &LinearProgram, sol: LpSolution) -> PyResult<PyLpSolution> {
    let k = lp.kkt_residuals(&sol.point);
    Ok(PyLpSolution {
        objective: lp.objective(&sol.point.x),
        converged: sol.converged(),
        kkt: (
            k.stationarity,
            k.dual_infeasibility,
            k.primal_infeasibility,
            k.complementarity,
        ),
        diagnosis: sol.diagnosis(),
        x: sol.point.x,
        y: sol.point.y,
        trajectory: Py::new(
            py,
            PyTrajectory {
                traj: sol.trajectory,
                stop: sol.stop,
            },
        )?,
    })
}

/// Solves with the projected-regularized flow from zero.
#[pyfunction]
#[pyo3(signature = (lp, rho = 3.0, scheme = "rk4", dt = 1e-3, t_max = 1000.0, tol = 1e-8, stride = 100))]
#[allow(clippy::too_many_arguments)]
fn solve_lp(
    py: Python<'_>,
    lp: &PyLinearProgram,
    rho: f64,
    scheme: &str,
    dt: f64,
    t_max: f64,
    tol: f64,
    stride: usize,
) -> PyResult<PyLpSolution> {
    let cfg = RegularizationConfig::new(rho).map_err(value_err)?;
    let icfg = integrator(scheme, dt, t_max, tol, stride)?;
    let sol = py.detach(|| lp::solve(&lp.lp, cfg, &icfg, None)).map_err(value_err)?;
    lp_solution(py, &lp.lp, sol)
}

/// Solves with synchronous per-agent Euler rounds from zero.
#[pyfunction]
#[pyo3(signature = (lp, rho = 3.0, dt = 1e-3, t_max = 1000.0, tol = 1e-8, stride = 100))]
fn solve_lp_distributed(
    py: Python<'_>,
    lp: &PyLinearProgram,
    rho: f64,
    dt: f64,
    t_max: f64,
    tol: f64,
    stride: usize,
) -> PyResult<PyLpSolution> {
    let cfg = RegularizationConfig::new(rho).map_err(value_err)?;
    let icfg = integrator("euler", dt, t_max, tol, stride)?;
    let sol = py
        .detach(|| lp::solve_distributed(&lp.lp, cfg, &icfg, None))
        .map_err(value_err)?;
    lp_solution(py, &lp.lp, sol)
}

/// `(objective, x, y)`
type OracleOptimum = (f64, Vec<f64>, Vec<f64>);

/// Exhaustive vertex enumeration. Returns `(objective, x, y)`, or `None`
/// when the LP is infeasible or unbounded.
#[pyfunction]
fn reference_solve(py: Python<'_>, lp: &PyLinearProgram) -> PyResult<Option<OracleOptimum>> {
    match py.detach(|| lp::reference_solve(&lp.lp)).map_err(value_err)? {
        ReferenceOutcome::Optimal { objective, x, y } => Ok(Some((objective, x, y))),
        _ => Ok(None),
    }
}

fn field_for(flow: &str, prob: SharedProblem, rho: f64) -> PyResult<VectorField> {
    let cfg = || RegularizationConfig::new(rho).map_err(value_err);
    Ok(match flow {
        "plain" => plain_field(prob),
        "regularized" => regularized_field(prob, cfg()?),
        "projected" => projected_field(prob),
        "projected-regularized" => projected_regularized_field(prob, cfg()?),
        "proximal" => proximal_field(prob, PROX_DEFAULT_TOL).map_err(value_err)?,
        other => return Err(PyValueError::new_err(format!("unknown flow `{other}`"))),
    })
}

/// Integrates `flow` on a builtin problem and attaches `V` and the matching
/// certificate measured against its known saddle.
///
/// The default start sets `x = 1` and every other coordinate to zero.
#[pyfunction]
#[pyo3(signature = (problem, flow = "regularized", rho = 3.0, init = None, scheme = "rk4", dt = 1e-3, t_max = 1000.0, tol = 1e-8, stride = 100))]
#[allow(clippy::too_many_arguments)]
fn run_flow(
    py: Python<'_>,
    problem: &str,
    flow: &str,
    rho: f64,
    init: Option<Vec<f64>>,
    scheme: &str,
    dt: f64,
    t_max: f64,
    tol: f64,
    stride: usize,
) -> PyResult<PyTrajectory> {
    let b = builtin(problem).ok_or_else(|| {
        PyValueError::new_err(format!(
            "unknown problem `{problem}`; builtins are {}",
            BUILTIN_NAMES.join(", ")
        ))
    })?;
    let field = field_for(flow, b.problem.clone(), rho)?;
    let icfg = integrator(scheme, dt, t_max, tol, stride)?;
    let init = init.unwrap_or_else(|| {
        let mut v = vec![0.0; field.dim()];
        v[..b.problem.dim_x()].fill(1.0);
        v
    });
    let (mut traj, stop) = py.detach(|| integrate(&field, &init, &icfg)).map_err(value_err)?;
    let reference = LyapunovReference::user(b.saddle.clone());
    let prob = b.problem.as_ref();
    let kind = match flow {
        "regularized" | "projected-regularized" => {
            CertificateKind::Separable(RegularizationConfig::new(rho).map_err(value_err)?)
        }
        "proximal" => CertificateKind::Proximal {
            prob,
            tol: PROX_DEFAULT_TOL,
        },
        "plain" if prob.convexity() == ConvexityClass::StrictlyConvexConcave => CertificateKind::Strict(prob),
        _ => CertificateKind::SaddleGap(prob),
    };
    trajectory_monitor(&reference, kind, &mut traj).map_err(value_err)?;
    Ok(PyTrajectory { traj, stop })
}

/// Evaluates the vector field of `flow` on a builtin problem at `state`.
#[pyfunction]
#[pyo3(signature = (problem, flow, state, rho = 3.0))]
fn field_value(problem: &str, flow: &str, state: Vec<f64>, rho: f64) -> PyResult<Vec<f64>> {
    let b = builtin(problem).ok_or_else(|| PyValueError::new_err(format!("unknown problem `{problem}`")))?;
    field_for(flow, b.problem, rho)?.eval(&state).map_err(value_err)
}

/// `[ν]⁺_y` componentwise.
#[pyfunction(name = "project")]
fn py_project(nu: Vec<f64>, y: Vec<f64>) -> PyResult<Vec<f64>> {
    if nu.len() != y.len() {
        return Err(PyValueError::new_err("nu and y must have the same length"));
    }
    Ok(project(&nu, &y))
}

#[pyfunction]
fn builtin_problems() -> Vec<&'static str> {
    BUILTIN_NAMES.to_vec()
}

/// The known saddle `(x, y)` of a builtin problem.
#[pyfunction]
fn builtin_saddle(problem: &str) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let b = builtin(problem).ok_or_else(|| PyValueError::new_err(format!("unknown problem `{problem}`")))?;
    let PointPair { x, y } = b.saddle;
    Ok((x, y))
}

/// Builds the split LP of a control instance given in the plain-text format.
#[pyfunction]
fn control_lp(text: &str) -> PyResult<PyLinearProgram> {
    let cp: ControlProblem = text.parse().map_err(value_err)?;
    Ok(PyLinearProgram { lp: build_lp(&cp).0 })
}

/// Replays the dynamics of a control instance under inputs `u[t][k]`;
/// returns `(x, objective)` with `x[t]` the state after step `t`.
#[pyfunction]
fn control_replay(text: &str, u: Vec<Vec<f64>>) -> PyResult<(Vec<Vec<f64>>, f64)> {
    let cp: ControlProblem = text.parse().map_err(value_err)?;
    let sol = ControlSolution::from_inputs(&cp, u).map_err(value_err)?;
    Ok((sol.x, sol.objective))
}

/// Solves the built-in two-agent control example and compares it with the
/// reported solution. Returns a dict of diagnostics.
#[pyfunction]
fn reproduce_paper(py: Python<'_>) -> PyResult<Py<pyo3::types::PyDict>> {
    use pyo3::types::PyDict;
    let run = py
        .detach(|| run_example_case(&saddleflow::control::example_integrator()))
        .map_err(value_err)?;
    if !run.lp_solution.converged() {
        return Err(PyRuntimeError::new_err(format!(
            "flow did not converge: {}",
            run.lp_solution.stop
        )));
    }
    let d = &run.diagnostics;
    let out = PyDict::new(py);
    let distances = PyDict::new(py);
    for dist in &d.distances {
        distances.set_item(&dist.label, (dist.computed, dist.reported))?;
    }
    out.set_item("distances", distances)?;
    out.set_item("max_distance", d.max_distance)?;
    out.set_item("within_tolerance", d.within_tolerance())?;
    out.set_item("final_dual", d.final_dual)?;
    out.set_item("final_dual_min", d.final_dual_min)?;
    out.set_item("split_overlap", d.split_overlap)?;
    out.set_item("objective", d.lp_objective)?;
    out.set_item("u", run.solution.u.clone())?;
    out.set_item("x", run.solution.x.clone())?;
    out.set_item("seconds", d.elapsed.as_secs_f64())?;
    Ok(out.unbind())
}

#[pymodule]
#[pyo3(name = "saddleflow")]
fn saddleflow_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyLinearProgram>()?;
    m.add_class::<PyLpSolution>()?;
    m.add_function(wrap_pyfunction!(run_flow, m)?)?;
    m.add_function(wrap_pyfunction!(field_value, m)?)?;
    m.add_function(wrap_pyfunction!(py_project, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_problems, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_saddle, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lp, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lp_distributed, m)?)?;
    m.add_function(wrap_pyfunction!(reference_solve, m)?)?;
    m.add_function(wrap_pyfunction!(control_lp, m)?)?;
    m.add_function(wrap_pyfunction!(control_replay, m)?)?;
    m.add_function(wrap_pyfunction!(reproduce_paper, m)?)?;
    Ok(())
}
