//! Finite-horizon minimum-effort control as an LP.
//!
//! The problem `min Σ_t ‖x(t+1)‖₁ + ‖u(t)‖₁` subject to
//! `x(t+1) = G x(t) + H u(t)` and `D x(T) ≤ d` is written over nonnegative
//! split variables `x = x⁺ − x⁻`, `u = u⁺ − u⁻`. Each dynamics equality
//! becomes a pair of opposing `≤` rows and nonnegativity becomes `−I` rows, so
//! the result fits `min cᵀv s.t. Av ≤ b` directly.

use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Result, SaddleError};
use crate::flows::RegularizationConfig;
use crate::integrate::{IntegratorConfig, Scheme};
use crate::lp::{solve, LinearProgram, LpSolution, Tokens};

#[derive(Debug, Clone, PartialEq)]
pub struct ControlProblem {
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub d_mat: DMatrix<f64>,
    pub d_vec: Vec<f64>,
    pub x0: Vec<f64>,
    pub horizon: usize,
}

impl ControlProblem {
    pub fn new(
        g: DMatrix<f64>,
        h: DMatrix<f64>,
        d_mat: DMatrix<f64>,
        d_vec: Vec<f64>,
        x0: Vec<f64>,
        horizon: usize,
    ) -> Result<Self> {
        let n = x0.len();
        if n == 0 {
            return Err(SaddleError::InvalidConfig("control problem needs N >= 1".into()));
        }
        if horizon == 0 {
            return Err(SaddleError::InvalidConfig("horizon T must be at least 1".into()));
        }
        check_len("rows of G", n, g.nrows())?;
        check_len("columns of G", n, g.ncols())?;
        check_len("rows of H", n, h.nrows())?;
        check_len("columns of H", n, h.ncols())?;
        check_len("columns of D", n, d_mat.ncols())?;
        check_len("d", d_mat.nrows(), d_vec.len())?;
        Ok(Self {
            g,
            h,
            d_mat,
            d_vec,
            x0,
            horizon,
        })
    }

    /// The two-agent, two-slot instance with `x(0) = (6, 10)`.
    pub fn example_instance() -> Self {
        Self::new(
            DMatrix::from_row_slice(2, 2, &[1.1, 0.0, -0.7, 1.1]),
            DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.5]),
            vec![3.0],
            vec![6.0, 10.0],
            2,
        )
        .expect("consistent instance")
    }

    /// Number of agents `N`.
    pub fn agents(&self) -> usize {
        self.x0.len()
    }

    /// Number of final-state constraints `M`.
    pub fn final_constraints(&self) -> usize {
        self.d_vec.len()
    }
}

/// Plain-text instance: `N M T`, then `G` (N rows), `H` (N rows), `D` (M rows),
/// `d` (M reals) and `x0` (N reals).
impl FromStr for ControlProblem {
    type Err = SaddleError;

    fn from_str(text: &str) -> Result<Self> {
        let mut t = Tokens::new(text);
        let n = t.usize("N")?;
        let m = t.usize("M")?;
        let horizon = t.usize("T")?;
        let g = DMatrix::from_row_slice(n, n, &t.reals(n * n, "G")?);
        let h = DMatrix::from_row_slice(n, n, &t.reals(n * n, "H")?);
        let d_mat = DMatrix::from_row_slice(m, n, &t.reals(m * n, "D")?);
        let d_vec = t.reals(m, "d")?;
        let x0 = t.reals(n, "x0")?;
        t.finish()?;
        Self::new(g, h, d_mat, d_vec, x0, horizon)
    }
}

/// Index bookkeeping for the split LP.
///
/// Variables are ordered `x⁺, x⁻, u⁺, u⁻`, each block time-major
/// (`x(1..=T)` and `u(0..T)`, agent index fastest). Rows are the dynamics
/// pairs (`+` then `−` row for each slot and agent), then the `M` final-state
/// rows, then one `−v ≤ 0` row per variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableMap {
    pub agents: usize,
    pub horizon: usize,
    pub final_constraints: usize,
}

impl VariableMap {
    fn block(&self) -> usize {
        self.agents * self.horizon
    }

    pub fn num_vars(&self) -> usize {
        4 * self.block()
    }

    pub fn num_rows(&self) -> usize {
        2 * self.block() + self.final_constraints + self.num_vars()
    }

    /// `x⁺_k(t)` for `t` in `1..=T`.
    pub fn x_plus(&self, t: usize, k: usize) -> usize {
        (t - 1) * self.agents + k
    }

    pub fn x_minus(&self, t: usize, k: usize) -> usize {
        self.block() + self.x_plus(t, k)
    }

    /// `u⁺_k(t)` for `t` in `0..T`.
    pub fn u_plus(&self, t: usize, k: usize) -> usize {
        2 * self.block() + t * self.agents + k
    }

    pub fn u_minus(&self, t: usize, k: usize) -> usize {
        self.block() + self.u_plus(t, k)
    }

    /// Row index of the `r`-th final-state constraint.
    pub fn final_row(&self, r: usize) -> usize {
        2 * self.block() + r
    }

    pub fn variable_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.num_vars());
        for (prefix, first) in [("xp", 1), ("xm", 1), ("up", 0), ("um", 0)] {
            for t in 0..self.horizon {
                for k in 0..self.agents {
                    names.push(format!("{prefix}{}_t{}", k + 1, t + first));
                }
            }
        }
        names
    }

    /// Recombines split values into `(u[t][k], x[t][k])` with `x` covering `x(1..=T)`.
    pub fn recombine(&self, v: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let u = (0..self.horizon)
            .map(|t| {
                (0..self.agents)
                    .map(|k| v[self.u_plus(t, k)] - v[self.u_minus(t, k)])
                    .collect()
            })
            .collect();
        let x = (1..=self.horizon)
            .map(|t| {
                (0..self.agents)
                    .map(|k| v[self.x_plus(t, k)] - v[self.x_minus(t, k)])
                    .collect()
            })
            .collect();
        (u, x)
    }

    /// Largest `min(v⁺, v⁻)` over all split pairs.
    pub fn split_overlap(&self, v: &[f64]) -> f64 {
        (0..2 * self.block())
            .map(|i| v[i].min(v[i + self.block()]))
            .fold(0.0, f64::max)
    }
}

pub fn build_lp(cp: &ControlProblem) -> (LinearProgram, VariableMap) {
    let (n_ag, horizon) = (cp.agents(), cp.horizon);
    let map = VariableMap {
        agents: n_ag,
        horizon,
        final_constraints: cp.final_constraints(),
    };
    let nv = map.num_vars();
    let mut a = DMatrix::zeros(map.num_rows(), nv);
    let mut b = vec![0.0; map.num_rows()];
    let gx0 = &cp.g * DVector::from_column_slice(&cp.x0);

    for t in 0..horizon {
        for k in 0..n_ag {
            // x(t+1)_k − Σ G_kl x(t)_l − Σ H_kl u(t)_l = [t = 0] (G x0)_k
            let mut row = vec![0.0; nv];
            row[map.x_plus(t + 1, k)] += 1.0;
            row[map.x_minus(t + 1, k)] -= 1.0;
            for l in 0..n_ag {
                if t > 0 {
                    row[map.x_plus(t, l)] -= cp.g[(k, l)];
                    row[map.x_minus(t, l)] += cp.g[(k, l)];
                }
                row[map.u_plus(t, l)] -= cp.h[(k, l)];
                row[map.u_minus(t, l)] += cp.h[(k, l)];
            }
            let rhs = if t == 0 { gx0[k] } else { 0.0 };
            let r = 2 * (t * n_ag + k);
            for (col, &v) in row.iter().enumerate() {
                a[(r, col)] = v;
                a[(r + 1, col)] = -v;
            }
            b[r] = rhs;
            b[r + 1] = -rhs;
        }
    }
    for r in 0..cp.final_constraints() {
        let row = map.final_row(r);
        for l in 0..n_ag {
            a[(row, map.x_plus(horizon, l))] = cp.d_mat[(r, l)];
            a[(row, map.x_minus(horizon, l))] = -cp.d_mat[(r, l)];
        }
        b[row] = cp.d_vec[r];
    }
    let base = 2 * n_ag * horizon + cp.final_constraints();
    for i in 0..nv {
        a[(base + i, i)] = -1.0;
    }
    let lp = LinearProgram::new(vec![1.0; nv], a, b).expect("consistent control LP");
    (lp, map)
}

/// Rolls `x(t+1) = G x(t) + H u(t)` forward; returns `x(1..=T)`.
pub fn simulate(cp: &ControlProblem, u: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_len("control slots", cp.horizon, u.len())?;
    let mut x = DVector::from_column_slice(&cp.x0);
    let mut out = Vec::with_capacity(cp.horizon);
    for ut in u {
        check_len("control input", cp.agents(), ut.len())?;
        x = &cp.g * &x + &cp.h * DVector::from_column_slice(ut);
        out.push(x.iter().copied().collect());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSolution {
    /// `u[t]` for `t` in `0..T`.
    pub u: Vec<Vec<f64>>,
    /// `x[t]` holds `x(t+1)`; produced by replaying `u` through the dynamics.
    pub x: Vec<Vec<f64>>,
    pub objective: f64,
}

impl ControlSolution {
    /// Builds a solution from control inputs, replaying the dynamics for `x`.
    pub fn from_inputs(cp: &ControlProblem, u: Vec<Vec<f64>>) -> Result<Self> {
        let x = simulate(cp, &u)?;
        let l1 = |v: &Vec<f64>| v.iter().map(|a| a.abs()).sum::<f64>();
        let objective = x.iter().map(l1).sum::<f64>() + u.iter().map(l1).sum::<f64>();
        Ok(Self { u, x, objective })
    }

    /// `max(D x(T) − d)`.
    pub fn final_violation(&self, cp: &ControlProblem) -> f64 {
        let xt = DVector::from_column_slice(self.x.last().expect("T >= 1"));
        let dx = &cp.d_mat * xt;
        dx.iter()
            .zip(&cp.d_vec)
            .map(|(a, b)| a - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Reported optimum of the built-in instance.
pub const REPORTED_U: [[f64; 2]; 2] = [[0.8190, 0.0], [-5.7410, 0.0]];
/// Reported states `x(1)`, `x(2)` of the built-in instance.
pub const REPORTED_X: [[f64; 2]; 2] = [[7.8286, 6.8000], [0.0, 2.0000]];
pub const EXAMPLE_RHO: f64 = 3.0;
/// Per-component tolerance against the reported values.
pub const REPORTED_TOLERANCE: f64 = 1e-2;

/// Integrator settings for the reproduction run.
pub fn example_integrator() -> IntegratorConfig {
    IntegratorConfig {
        scheme: Scheme::Rk4,
        dt: 1e-3,
        t_max: 2000.0,
        conv_tol: 1e-8,
        conv_window: 10,
        record_stride: 100,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Distance {
    pub label: String,
    pub computed: f64,
    pub reported: f64,
}

impl Distance {
    pub fn abs(&self) -> f64 {
        (self.computed - self.reported).abs()
    }
}

#[derive(Debug, Clone)]
pub struct ReproductionDiagnostics {
    pub distances: Vec<Distance>,
    pub max_distance: f64,
    /// Smallest value the final-state dual took over all recorded samples.
    pub final_dual_min: f64,
    pub final_dual: f64,
    /// Largest `min(v⁺, v⁻)` over split pairs at the final state.
    pub split_overlap: f64,
    pub lp_objective: f64,
    pub final_violation: f64,
    pub elapsed: Duration,
}

impl ReproductionDiagnostics {
    pub fn within_tolerance(&self) -> bool {
        self.max_distance <= REPORTED_TOLERANCE
    }
}

#[derive(Debug, Clone)]
pub struct ExampleRun {
    pub problem: ControlProblem,
    pub lp: LinearProgram,
    pub map: VariableMap,
    pub lp_solution: LpSolution,
    pub solution: ControlSolution,
    pub diagnostics: ReproductionDiagnostics,
}

/// Solves the built-in instance with `icfg`, whether or not it converges.
pub fn run_example_case(icfg: &IntegratorConfig) -> Result<ExampleRun> {
    let cp = ControlProblem::example_instance();
    let (lp, map) = build_lp(&cp);
    let cfg = RegularizationConfig::new(EXAMPLE_RHO)?;
    let started = Instant::now();
    let lp_solution = solve(&lp, cfg, icfg, None)?;
    let elapsed = started.elapsed();

    let (u, _) = map.recombine(&lp_solution.point.x);
    let solution = ControlSolution::from_inputs(&cp, u)?;

    let mut distances = Vec::new();
    for t in 0..2 {
        for k in 0..2 {
            distances.push(Distance {
                label: format!("u{}({t})", k + 1),
                computed: solution.u[t][k],
                reported: REPORTED_U[t][k],
            });
        }
    }
    for t in 0..2 {
        for k in 0..2 {
            distances.push(Distance {
                label: format!("x{}({})", k + 1, t + 1),
                computed: solution.x[t][k],
                reported: REPORTED_X[t][k],
            });
        }
    }
    let max_distance = distances.iter().map(Distance::abs).fold(0.0, f64::max);

    // the final-state dual sits at index 2NT + n + m + r in [x, z, y, w]
    let dual_col = 2 * lp.n() + map.final_row(0);
    let traj = &lp_solution.trajectory;
    let final_dual_min = traj.states.iter().map(|s| s[dual_col]).fold(f64::INFINITY, f64::min);
    let final_dual = lp_solution.point.y[map.final_row(0)];

    let diagnostics = ReproductionDiagnostics {
        max_distance,
        distances,
        final_dual_min,
        final_dual,
        split_overlap: map.split_overlap(&lp_solution.point.x),
        lp_objective: lp.objective(&lp_solution.point.x),
        final_violation: solution.final_violation(&cp),
        elapsed,
    };
    Ok(ExampleRun {
        problem: cp,
        lp,
        map,
        lp_solution,
        solution,
        diagnostics,
    })
}

/// Runs the built-in instance with [`example_integrator`] and fails unless the
/// flow converges.
pub fn reproduce_paper_case() -> Result<(ControlSolution, ReproductionDiagnostics)> {
    let run = run_example_case(&example_integrator())?;
    if !run.lp_solution.converged() {
        return Err(SaddleError::FlowNotConverged {
            detail: run.lp_solution.stop.to_string(),
            final_state: run.lp_solution.trajectory.final_state().unwrap_or_default().to_vec(),
        });
    }
    Ok((run.solution, run.diagnostics))
}
