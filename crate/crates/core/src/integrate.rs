//! Fixed-step integration of vector fields with trajectory recording.
//!
//! Projected fields are integrated by evaluating the projected field at every
//! stage and clamping masked coordinates back onto the orthant after the step.

use std::fmt;

use crate::error::{check_len, Result, SaddleError};
use crate::flows::{norm, StateLayout, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Euler,
    Rk4,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Euler => "euler",
            Scheme::Rk4 => "rk4",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = SaddleError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Scheme::Euler),
            "rk4" => Ok(Scheme::Rk4),
            other => Err(SaddleError::InvalidConfig(format!("unknown scheme `{other}`"))),
        }
    }
}

/// States whose norm exceeds this are classified as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_max: f64,
    pub conv_tol: f64,
    pub conv_window: usize,
    pub record_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Rk4,
            dt: 1e-3,
            t_max: 1000.0,
            conv_tol: 1e-8,
            conv_window: 10,
            record_stride: 100,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SaddleError::InvalidConfig(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if self.dt > self.t_max {
            return bad(format!("dt ({}) exceeds t_max ({})", self.dt, self.t_max));
        }
        if !(self.conv_tol > 0.0) {
            return bad(format!("conv_tol must be positive, got {}", self.conv_tol));
        }
        if self.conv_window == 0 {
            return bad("conv_window must be at least 1".into());
        }
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1".into());
        }
        Ok(())
    }

    /// Number of steps needed to cover `t_max`.
    pub fn steps(&self) -> u64 {
        ((self.t_max / self.dt) - 1e-9).ceil().max(1.0) as u64
    }
}

/// Per-sample monitor values attached by the certificate monitor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxSample {
    pub lyapunov: f64,
    pub h1: f64,
    pub h2: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub layout: StateLayout,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `‖f(state)‖` at every recorded sample.
    pub residuals: Vec<f64>,
    pub aux: Option<Vec<AuxSample>>,
}

impl Trajectory {
    pub fn new(layout: StateLayout) -> Self {
        Self {
            layout,
            times: Vec::new(),
            states: Vec::new(),
            residuals: Vec::new(),
            aux: None,
        }
    }

    pub fn push(&mut self, t: f64, state: &[f64], residual: f64) {
        self.times.push(t);
        self.states.push(state.to_vec());
        self.residuals.push(residual);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.residuals.last().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopKind {
    Converged,
    HorizonReached,
    Diverged,
    InnerFailure,
}

impl fmt::Display for StopKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopKind::Converged => "converged",
            StopKind::HorizonReached => "horizon-reached",
            StopKind::Diverged => "diverged",
            StopKind::InnerFailure => "inner-failure",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopReason {
    pub kind: StopKind,
    pub detail: String,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.detail)
    }
}

/// Reusable stage buffers for one field.
pub struct Stepper<'f> {
    field: &'f VectorField,
    scheme: Scheme,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'f> Stepper<'f> {
    pub fn new(field: &'f VectorField, scheme: Scheme) -> Self {
        let d = field.dim();
        Self {
            field,
            scheme,
            k: [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]],
            tmp: vec![0.0; d],
        }
    }

    /// Advances `state` in place by one step of size `dt`.
    pub fn advance(&mut self, state: &mut [f64], dt: f64) -> Result<()> {
        let f = self.field;
        let d = state.len();
        match self.scheme {
            Scheme::Euler => {
                f.eval_unchecked(state, &mut self.k[0])?;
                check_finite(&self.k[0])?;
                for i in 0..d {
                    state[i] += dt * self.k[0][i];
                }
            }
            Scheme::Rk4 => {
                let [k1, k2, k3, k4] = &mut self.k;
                let tmp = &mut self.tmp;
                f.eval_unchecked(state, k1)?;
                check_finite(k1)?;
                for i in 0..d {
                    tmp[i] = state[i] + 0.5 * dt * k1[i];
                }
                f.eval_unchecked(tmp, k2)?;
                check_finite(k2)?;
                for i in 0..d {
                    tmp[i] = state[i] + 0.5 * dt * k2[i];
                }
                f.eval_unchecked(tmp, k3)?;
                check_finite(k3)?;
                for i in 0..d {
                    tmp[i] = state[i] + dt * k3[i];
                }
                f.eval_unchecked(tmp, k4)?;
                check_finite(k4)?;
                for i in 0..d {
                    state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
        clamp_masked(f.nonneg_mask(), state);
        Ok(())
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|a| a.is_finite()) {
        Ok(())
    } else {
        Err(SaddleError::Diverged("non-finite field value".into()))
    }
}

#[inline]
pub(crate) fn clamp_nonneg(v: f64) -> f64 {
    if v < 0.0 {
        0.0
    } else {
        v
    }
}

fn clamp_masked(mask: &[bool], state: &mut [f64]) {
    for (s, &m) in state.iter_mut().zip(mask) {
        if m {
            *s = clamp_nonneg(*s);
        }
    }
}

/// One Euler or RK4 step followed by the orthant clamp on masked coordinates.
pub fn step(field: &VectorField, scheme: Scheme, state: &[f64], dt: f64) -> Result<Vec<f64>> {
    check_len("state", field.dim(), state.len())?;
    if !(dt > 0.0) {
        return Err(SaddleError::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    let mut next = state.to_vec();
    Stepper::new(field, scheme).advance(&mut next, dt)?;
    Ok(next)
}

/// Integrates `field` from `init` until convergence, the horizon, or divergence.
///
/// Every `record_stride`-th step is recorded together with the residual
/// `‖f(state)‖`; the run is converged once `conv_window` consecutive recorded
/// residuals are at most `conv_tol`. The final state is always recorded.
pub fn integrate(field: &VectorField, init: &[f64], cfg: &IntegratorConfig) -> Result<(Trajectory, StopReason)> {
    cfg.validate()?;
    check_len("initial state", field.dim(), init.len())?;
    for (i, (&v, &masked)) in init.iter().zip(field.nonneg_mask()).enumerate() {
        if masked && v < 0.0 {
            return Err(SaddleError::InvalidInit(format!(
                "coordinate {i} is constrained to be nonnegative but starts at {v}"
            )));
        }
    }

    let mut traj = Trajectory::new(field.layout());
    let mut state = init.to_vec();
    let mut rate = vec![0.0; field.dim()];
    let mut stepper = Stepper::new(field, cfg.scheme);
    let total = cfg.steps();
    let mut below: usize;

    let residual_at = |state: &[f64], rate: &mut [f64]| -> Result<f64> {
        field.eval_unchecked(state, rate)?;
        Ok(norm(rate))
    };

    let stop = |kind, detail: String| StopReason { kind, detail };

    match residual_at(&state, &mut rate) {
        Ok(r) => {
            traj.push(0.0, &state, r);
            below = usize::from(r <= cfg.conv_tol);
            if below >= cfg.conv_window {
                return Ok((traj, stop(StopKind::Converged, format!("residual {r:e} at t = 0"))));
            }
        }
        Err(e) => return Ok((traj_with(traj, 0.0, &state), failure(e))),
    }

    for k in 1..=total {
        if let Err(e) = stepper.advance(&mut state, cfg.dt) {
            let t = (k - 1) as f64 * cfg.dt;
            return Ok((traj_with(traj, t, &state), failure(e)));
        }
        let t = k as f64 * cfg.dt;
        let state_norm = norm(&state);
        if !(state_norm <= DIVERGENCE_THRESHOLD) {
            let traj = traj_with(traj, t, &state);
            return Ok((
                traj,
                stop(
                    StopKind::Diverged,
                    format!("state norm {state_norm:e} exceeded {DIVERGENCE_THRESHOLD:e} at t = {t}"),
                ),
            ));
        }
        let on_stride = k % cfg.record_stride as u64 == 0;
        if on_stride || k == total {
            let r = match residual_at(&state, &mut rate) {
                Ok(r) => r,
                Err(e) => return Ok((traj_with(traj, t, &state), failure(e))),
            };
            traj.push(t, &state, r);
            if on_stride {
                below = if r <= cfg.conv_tol { below + 1 } else { 0 };
                if below >= cfg.conv_window {
                    return Ok((traj, stop(StopKind::Converged, format!("residual {r:e} at t = {t}"))));
                }
            }
        }
    }
    let r = traj.final_residual().unwrap_or(f64::NAN);
    Ok((
        traj,
        stop(
            StopKind::HorizonReached,
            format!("t_max = {} reached with residual {r:e}", cfg.t_max),
        ),
    ))
}

fn traj_with(mut traj: Trajectory, t: f64, state: &[f64]) -> Trajectory {
    if traj.times.last().is_none_or(|&last| t > last) {
        traj.push(t, state, f64::NAN);
    }
    traj
}

fn failure(e: SaddleError) -> StopReason {
    let kind = match e {
        SaddleError::Diverged(_) => StopKind::Diverged,
        _ => StopKind::InnerFailure,
    };
    StopReason {
        kind,
        detail: e.to_string(),
    }
}
