//! Inequality-constrained linear programs `min cᵀx s.t. Ax − b ≤ 0`.
//!
//! [`solve`] runs the projected-regularized saddle flow of the LP Lagrangian,
//! [`distributed`] splits the same flow into per-variable and per-constraint
//! agents, and [`reference`] is an exhaustive vertex-enumeration oracle for
//! small instances.

pub mod distributed;
pub mod reference;

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{check_len, Result, SaddleError};
use crate::flows::{extract_original_saddle, norm, projected_regularized_field, AugmentedState, RegularizationConfig};
use crate::integrate::{integrate, IntegratorConfig, Scheme, StopKind, StopReason, Trajectory, DIVERGENCE_THRESHOLD};
use crate::problem::{PointPair, QuadraticSaddle};

pub use distributed::{
    distributed_round, partition, AgentPartition, Broadcast, DistributedLp, LocalStates, RoundMessage,
};
pub use reference::{reference_solve, ReferenceOutcome};

/// Regularization coefficient used when none is given.
pub const DEFAULT_RHO: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    c: Vec<f64>,
    a: DMatrix<f64>,
    b: Vec<f64>,
}

impl LinearProgram {
    /// `a` is `m × n`; `m` may be zero.
    pub fn new(c: Vec<f64>, a: DMatrix<f64>, b: Vec<f64>) -> Result<Self> {
        if c.is_empty() {
            return Err(SaddleError::InvalidConfig("LP needs at least one variable".into()));
        }
        check_len("columns of A", c.len(), a.ncols())?;
        check_len("b", a.nrows(), b.len())?;
        if !c.iter().chain(a.iter()).chain(&b).all(|v| v.is_finite()) {
            return Err(SaddleError::InvalidConfig("LP data must be finite".into()));
        }
        Ok(Self { c, a, b })
    }

    /// Builds from row-major constraint rows.
    pub fn from_rows(c: Vec<f64>, rows: &[Vec<f64>], b: Vec<f64>) -> Result<Self> {
        let n = c.len();
        for row in rows {
            check_len("constraint row", n, row.len())?;
        }
        let a = DMatrix::from_fn(rows.len(), n, |j, i| rows[j][i]);
        Self::new(c, a, b)
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// `Ax − b`.
    pub fn slack(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m())
            .map(|j| (0..self.n()).map(|i| self.a[(j, i)] * x[i]).sum::<f64>() - self.b[j])
            .collect()
    }

    /// Stationarity, dual feasibility, primal feasibility and complementarity residuals.
    pub fn kkt_residuals(&self, p: &PointPair) -> KktResiduals {
        let stationarity = (0..self.n())
            .map(|i| {
                let g = self.c[i] + (0..self.m()).map(|j| self.a[(j, i)] * p.y[j]).sum::<f64>();
                g * g
            })
            .sum::<f64>()
            .sqrt();
        let slack = self.slack(&p.x);
        KktResiduals {
            stationarity,
            dual_infeasibility: p.y.iter().map(|&y| (-y).max(0.0)).fold(0.0, f64::max),
            primal_infeasibility: slack.iter().map(|&s| s.max(0.0)).fold(0.0, f64::max),
            complementarity: p.y.iter().zip(&slack).map(|(y, s)| y * s).sum::<f64>().abs(),
        }
    }

    /// Writes the plain-text format read by [`FromStr`].
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n(), self.m());
        let join = |v: &mut dyn Iterator<Item = f64>| v.map(fmt_real).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "{}", join(&mut self.c.iter().copied()));
        for j in 0..self.m() {
            let mut row = (0..self.n()).map(|i| self.a[(j, i)]).chain(std::iter::once(self.b[j]));
            let _ = writeln!(out, "{}", join(&mut row));
        }
        out
    }
}

fn fmt_real(v: f64) -> String {
    // shortest representation that round-trips
    format!("{v:?}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `‖c + Aᵀy‖`
    pub stationarity: f64,
    /// `max(−y)⁺`
    pub dual_infeasibility: f64,
    /// `max(Ax − b)⁺`
    pub primal_infeasibility: f64,
    /// `|yᵀ(Ax − b)|`
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.dual_infeasibility)
            .max(self.primal_infeasibility)
            .max(self.complementarity)
    }
}

/// Reads whitespace-separated decimal tokens: `n m`, then `c` (n reals), then
/// `m` rows of `A_j b_j`. Blank lines and `#` comments are ignored.
impl FromStr for LinearProgram {
    type Err = SaddleError;

    fn from_str(text: &str) -> Result<Self> {
        let mut tokens = Tokens::new(text);
        let n = tokens.usize("n")?;
        let m = tokens.usize("m")?;
        let c = tokens.reals(n, "c")?;
        let mut rows = Vec::with_capacity(m);
        let mut b = Vec::with_capacity(m);
        for _ in 0..m {
            let mut row = tokens.reals(n + 1, "constraint row")?;
            b.push(row.pop().expect("n + 1 entries"));
            rows.push(row);
        }
        tokens.finish()?;
        Self::from_rows(c, &rows, b)
    }
}

/// Whitespace tokenizer that tracks line numbers for error messages.
pub(crate) struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .flat_map(|(k, line)| {
                let line = line.split('#').next().unwrap_or("");
                line.split_whitespace().map(move |t| (k + 1, t))
            })
            .collect();
        Self { items, pos: 0 }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        let last_line = self.items.last().map_or(1, |t| t.0);
        let item = self.items.get(self.pos).copied().ok_or_else(|| SaddleError::Parse {
            line: last_line,
            msg: format!("unexpected end of input while reading {what}"),
        })?;
        self.pos += 1;
        Ok(item)
    }

    pub(crate) fn usize(&mut self, what: &str) -> Result<usize> {
        let (line, tok) = self.next(what)?;
        tok.parse().map_err(|_| SaddleError::Parse {
            line,
            msg: format!("expected a nonnegative integer for {what}, found `{tok}`"),
        })
    }

    pub(crate) fn real(&mut self, what: &str) -> Result<f64> {
        let (line, tok) = self.next(what)?;
        match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(SaddleError::Parse {
                line,
                msg: format!("expected a finite real for {what}, found `{tok}`"),
            }),
        }
    }

    pub(crate) fn reals(&mut self, k: usize, what: &str) -> Result<Vec<f64>> {
        (0..k).map(|_| self.real(what)).collect()
    }

    pub(crate) fn finish(&self) -> Result<()> {
        match self.items.get(self.pos) {
            None => Ok(()),
            Some(&(line, tok)) => Err(SaddleError::Parse {
                line,
                msg: format!("trailing token `{tok}`"),
            }),
        }
    }
}

/// `S(x, y) = cᵀx + yᵀ(Ax − b)`, with `∇ₓS = c + Aᵀy` and `∇ᵧS = Ax − b`.
///
/// An LP without constraints gets a single dummy row `0ᵀx ≤ 0` so the
/// Lagrangian keeps `m ≥ 1`.
pub fn lagrangian(lp: &LinearProgram) -> QuadraticSaddle {
    let (coupling, lin_y) = if lp.m() == 0 {
        (DMatrix::zeros(lp.n(), 1), vec![0.0])
    } else {
        (lp.a.transpose(), lp.b.iter().map(|b| -b).collect())
    };
    QuadraticSaddle::new(None, coupling, None, lp.c.clone(), lin_y).expect("LP data already validated")
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Recovered `(x, y)`; on non-convergence this is the last iterate.
    pub point: PointPair,
    pub trajectory: Trajectory,
    pub stop: StopReason,
}

impl LpSolution {
    pub fn converged(&self) -> bool {
        self.stop.kind == StopKind::Converged
    }

    /// Human-readable diagnosis of a run that did not converge.
    pub fn diagnosis(&self) -> Option<String> {
        match self.stop.kind {
            StopKind::Converged => None,
            StopKind::Diverged => Some(format!(
                "flow diverged ({}); the LP is likely unbounded or infeasible",
                self.stop.detail
            )),
            StopKind::HorizonReached => Some(format!(
                "horizon reached before convergence ({}); increase t_max or check feasibility",
                self.stop.detail
            )),
            StopKind::InnerFailure => Some(self.stop.detail.clone()),
        }
    }
}

/// Solves `lp` by integrating the projected-regularized flow of its Lagrangian
/// from `init` (all zeros when `None`).
///
/// On convergence the virtual copies are within `ρ · conv_tol` of the
/// originals, because `‖ż‖ = ‖x − z‖/ρ` is bounded by the field residual.
pub fn solve(
    lp: &LinearProgram,
    cfg: RegularizationConfig,
    icfg: &IntegratorConfig,
    init: Option<&AugmentedState>,
) -> Result<LpSolution> {
    let prob = lagrangian(lp);
    let (n, m) = prob.dims();
    let init = match init {
        Some(st) => {
            check_len("initial x", n, st.x.len())?;
            check_len("initial y", m, st.y.len())?;
            AugmentedState::new(st.x.clone(), st.z.clone(), st.y.clone(), st.w.clone())?
        }
        None => AugmentedState::zeros(n, m),
    };
    if init.y.iter().chain(&init.w).any(|&v| v < 0.0) {
        return Err(SaddleError::InvalidInit("initial y and w must be nonnegative".into()));
    }
    let field = projected_regularized_field(Arc::new(prob), cfg);
    let (trajectory, stop) = integrate(&field, &init.to_vec(), icfg)?;
    finish(lp, cfg, icfg, trajectory, stop)
}

/// Distributed counterpart of [`solve`]: synchronous agent rounds from
/// `init` (all zeros when `None`), recorded and stopped exactly as
/// [`integrate`] would. Rounds are Euler steps, so `icfg.scheme` must be
/// [`Scheme::Euler`]. Residuals are scored with the centralized field.
pub fn solve_distributed(
    lp: &LinearProgram,
    cfg: RegularizationConfig,
    icfg: &IntegratorConfig,
    init: Option<LocalStates>,
) -> Result<LpSolution> {
    icfg.validate()?;
    if icfg.scheme != Scheme::Euler {
        return Err(SaddleError::InvalidConfig(format!(
            "distributed rounds are Euler steps; scheme {} is not available",
            icfg.scheme
        )));
    }
    let field = projected_regularized_field(Arc::new(lagrangian(lp)), cfg);
    // Agents carry no dual for a constraint-free LP; the field has one inert dual.
    let score = |s: &[f64]| {
        if lp.m() == 0 {
            field.residual(&[s, &[0.0, 0.0]].concat())
        } else {
            field.residual(s)
        }
    };
    let mut agents = DistributedLp::new(lp, cfg);
    if let Some(states) = init {
        agents = agents.with_states(states)?;
    }
    let mut trajectory = Trajectory::new(agents.layout());
    let mut state = agents.states().to_vec();
    let r = score(&state)?;
    trajectory.push(0.0, &state, r);
    let mut below = usize::from(r <= icfg.conv_tol);
    let total = icfg.steps();
    let mut stop = None;
    if below >= icfg.conv_window {
        stop = Some((StopKind::Converged, format!("residual {r:e} at t = 0")));
    }
    for k in 1..=total {
        if stop.is_some() {
            break;
        }
        agents.step(icfg.dt)?;
        state = agents.states().to_vec();
        let t = k as f64 * icfg.dt;
        let state_norm = norm(&state);
        if !(state_norm <= DIVERGENCE_THRESHOLD) {
            trajectory.push(t, &state, f64::NAN);
            stop = Some((
                StopKind::Diverged,
                format!("state norm {state_norm:e} exceeded {DIVERGENCE_THRESHOLD:e} at t = {t}"),
            ));
            break;
        }
        let on_stride = k % icfg.record_stride as u64 == 0;
        if on_stride || k == total {
            let r = score(&state)?;
            trajectory.push(t, &state, r);
            if on_stride {
                below = if r <= icfg.conv_tol { below + 1 } else { 0 };
                if below >= icfg.conv_window {
                    stop = Some((StopKind::Converged, format!("residual {r:e} at t = {t}")));
                }
            }
        }
    }
    let (kind, detail) = stop.unwrap_or_else(|| {
        let r = trajectory.final_residual().unwrap_or(f64::NAN);
        (
            StopKind::HorizonReached,
            format!("t_max = {} reached with residual {r:e}", icfg.t_max),
        )
    });
    finish(lp, cfg, icfg, trajectory, StopReason { kind, detail })
}

fn finish(
    lp: &LinearProgram,
    cfg: RegularizationConfig,
    icfg: &IntegratorConfig,
    trajectory: Trajectory,
    mut stop: StopReason,
) -> Result<LpSolution> {
    let final_state = trajectory.final_state().expect("nonempty");
    // A centralized run on a constraint-free LP carries one inert dual.
    let (n, m) = (lp.n(), final_state.len() / 2 - lp.n());
    if stop.kind == StopKind::HorizonReached {
        if let Some(speed) = radial_escape(&trajectory) {
            stop = StopReason {
                kind: StopKind::Diverged,
                detail: format!(
                    "state norm growing steadily at rate {speed:.3e} when t_max = {} was reached",
                    icfg.t_max
                ),
            };
        }
    }
    let last = AugmentedState::from_slice(n, m, final_state)?;
    let mut point = if stop.kind == StopKind::Converged {
        extract_original_saddle(&last, cfg.rho() * icfg.conv_tol * (1.0 + 1e-9))?
    } else {
        PointPair::new(last.x.clone(), last.y.clone())
    };
    point.y.truncate(lp.m());
    Ok(LpSolution {
        point,
        trajectory,
        stop,
    })
}

/// Unbounded and infeasible LPs escape linearly, far too slowly to reach the
/// integrator's norm threshold. Flags a run whose speed `‖f‖` has not decayed
/// over its second half while the norm kept growing at least at half that
/// speed and rose by a factor of 1.5 or more. Slowly converging runs fail the
/// first or last test because their speed decays and their norm settles.
fn radial_escape(traj: &Trajectory) -> Option<f64> {
    let last = traj.len().checked_sub(1)?;
    let mid = last / 2;
    if last < 2 {
        return None;
    }
    let (t0, t1) = (traj.times[mid], traj.times[last]);
    let (speed0, speed) = (traj.residuals[mid], traj.residuals[last]);
    if t1 <= t0 || !(speed > 0.0) || speed < 0.5 * speed0 {
        return None;
    }
    let (r0, r1) = (norm(&traj.states[mid]), norm(&traj.states[last]));
    let radial = (r1 - r0) / (t1 - t0);
    (radial >= 0.5 * speed && r1 >= 1.5 * r0).then_some(radial)
}
