//! Per-agent decomposition of the projected-regularized LP flow.
//!
//! Primal agent `i` owns `(x_i, z_i, c_i, A_i)` where `A_i` is the i-th column
//! of `A`; dual agent `j` owns `(y_j, w_j, A_j, b_j)` where `A_j` is the j-th
//! row. Rounds are synchronous: every agent broadcasts its public value, the
//! messages are assembled into a [`Broadcast`], then each agent takes one
//! Euler step using only its own data and the broadcast.

use nalgebra::DMatrix;

use crate::error::{Result, SaddleError};
use crate::flows::{dual_rate, primal_rate, project_component, virtual_rate, RegularizationConfig, StateLayout};
use crate::integrate::{clamp_nonneg, Trajectory};
use crate::lp::LinearProgram;

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalAgentSpec {
    pub index: usize,
    pub c: f64,
    /// Column `A_i`, one entry per constraint.
    pub column: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualAgentSpec {
    pub index: usize,
    /// Row `A_j`, one entry per variable.
    pub row: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentPartition {
    pub primal: Vec<PrimalAgentSpec>,
    pub dual: Vec<DualAgentSpec>,
}

impl AgentPartition {
    pub fn n(&self) -> usize {
        self.primal.len()
    }

    pub fn m(&self) -> usize {
        self.dual.len()
    }

    /// Rebuilds the LP from the agents' local data. Columns and rows must agree
    /// on every entry of `A`.
    pub fn reassemble(&self) -> Result<LinearProgram> {
        let (n, m) = (self.n(), self.m());
        let a = DMatrix::from_fn(m, n, |j, i| self.dual[j].row[i]);
        for agent in &self.primal {
            for j in 0..m {
                if agent.column[j].to_bits() != a[(j, agent.index)].to_bits() {
                    return Err(SaddleError::Protocol(format!(
                        "column of primal agent {} disagrees with row {j}",
                        agent.index
                    )));
                }
            }
        }
        LinearProgram::new(
            self.primal.iter().map(|a| a.c).collect(),
            a,
            self.dual.iter().map(|d| d.b).collect(),
        )
    }
}

/// One primal agent per variable and one dual agent per constraint.
pub fn partition(lp: &LinearProgram) -> AgentPartition {
    let a = lp.a();
    AgentPartition {
        primal: (0..lp.n())
            .map(|i| PrimalAgentSpec {
                index: i,
                c: lp.c()[i],
                column: a.column(i).iter().copied().collect(),
            })
            .collect(),
        dual: (0..lp.m())
            .map(|j| DualAgentSpec {
                index: j,
                row: a.row(j).iter().copied().collect(),
                b: lp.b()[j],
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentId {
    Primal(usize),
    Dual(usize),
}

/// What one agent publishes in one round: `[x_i]` for primal agents and
/// `[y_j]` for dual agents.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMessage {
    pub sender: AgentId,
    pub round: u64,
    pub payload: Vec<f64>,
}

/// The global view every agent receives at the start of a round.
#[derive(Debug, Clone, PartialEq)]
pub struct Broadcast {
    pub round: u64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Broadcast {
    /// Assembles one round's messages. Exactly one finite scalar message per
    /// agent is required.
    pub fn collect(n: usize, m: usize, round: u64, messages: &[RoundMessage]) -> Result<Self> {
        let mut x = vec![None; n];
        let mut y = vec![None; m];
        for msg in messages {
            if msg.round != round {
                return Err(SaddleError::Protocol(format!(
                    "message from {:?} is for round {}, expected {round}",
                    msg.sender, msg.round
                )));
            }
            let value = match msg.payload.as_slice() {
                [v] if v.is_finite() => *v,
                _ => {
                    return Err(SaddleError::Protocol(format!(
                        "malformed payload from {:?}: {:?}",
                        msg.sender, msg.payload
                    )))
                }
            };
            let slot = match msg.sender {
                AgentId::Primal(i) => x.get_mut(i),
                AgentId::Dual(j) => y.get_mut(j),
            }
            .ok_or_else(|| SaddleError::Protocol(format!("unknown sender {:?}", msg.sender)))?;
            if slot.replace(value).is_some() {
                return Err(SaddleError::Protocol(format!(
                    "duplicate message from {:?}",
                    msg.sender
                )));
            }
        }
        let fill = |v: Vec<Option<f64>>, kind: &str| -> Result<Vec<f64>> {
            v.into_iter()
                .enumerate()
                .map(|(k, v)| {
                    v.ok_or_else(|| SaddleError::Protocol(format!("missing broadcast from {kind} agent {k}")))
                })
                .collect()
        };
        Ok(Self {
            round,
            x: fill(x, "primal")?,
            y: fill(y, "dual")?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimalState {
    pub x: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualState {
    pub y: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalStates {
    pub primal: Vec<PrimalState>,
    pub dual: Vec<DualState>,
}

impl LocalStates {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            primal: vec![PrimalState { x: 0.0, z: 0.0 }; n],
            dual: vec![DualState { y: 0.0, w: 0.0 }; m],
        }
    }

    /// Flattened `[x, z, y, w]`, the centralized state layout.
    pub fn to_vec(&self) -> Vec<f64> {
        let p = &self.primal;
        let d = &self.dual;
        p.iter()
            .map(|s| s.x)
            .chain(p.iter().map(|s| s.z))
            .chain(d.iter().map(|s| s.y))
            .chain(d.iter().map(|s| s.w))
            .collect()
    }

    pub fn messages(&self, round: u64) -> Vec<RoundMessage> {
        let primal = self.primal.iter().enumerate().map(|(i, s)| RoundMessage {
            sender: AgentId::Primal(i),
            round,
            payload: vec![s.x],
        });
        let dual = self.dual.iter().enumerate().map(|(j, s)| RoundMessage {
            sender: AgentId::Dual(j),
            round,
            payload: vec![s.y],
        });
        primal.chain(dual).collect()
    }
}

/// One Euler step for primal agent `i`, which sees only its own data and `y`.
fn primal_update(spec: &PrimalAgentSpec, own: PrimalState, y: &[f64], rho: f64, dt: f64) -> PrimalState {
    let mut g = spec.c;
    for (a, yj) in spec.column.iter().zip(y) {
        g += a * yj;
    }
    let dx = primal_rate(g, own.x, own.z, rho);
    let dz = virtual_rate(own.x, own.z, rho);
    PrimalState {
        x: own.x + dt * dx,
        z: own.z + dt * dz,
    }
}

/// One projected Euler step for dual agent `j`, which sees only its own data and `x`.
fn dual_update(spec: &DualAgentSpec, own: DualState, x: &[f64], rho: f64, dt: f64) -> DualState {
    let mut g = -spec.b;
    for (a, xi) in spec.row.iter().zip(x) {
        g += a * xi;
    }
    let dy = project_component(dual_rate(g, own.y, own.w, rho), own.y);
    let dw = virtual_rate(own.y, own.w, rho);
    DualState {
        y: clamp_nonneg(own.y + dt * dy),
        w: own.w + dt * dw,
    }
}

/// Advances every agent by one synchronous round.
pub fn distributed_round(
    partition: &AgentPartition,
    states: &LocalStates,
    broadcast: &Broadcast,
    cfg: RegularizationConfig,
    dt: f64,
) -> Result<LocalStates> {
    let (n, m) = (partition.n(), partition.m());
    if broadcast.x.len() != n || broadcast.y.len() != m {
        return Err(SaddleError::Protocol(format!(
            "broadcast carries {} primal and {} dual values, expected {n} and {m}",
            broadcast.x.len(),
            broadcast.y.len()
        )));
    }
    if states.primal.len() != n || states.dual.len() != m {
        return Err(SaddleError::Protocol(
            "local state count does not match the partition".into(),
        ));
    }
    let rho = cfg.rho();
    Ok(LocalStates {
        primal: partition
            .primal
            .iter()
            .zip(&states.primal)
            .map(|(spec, &own)| primal_update(spec, own, &broadcast.y, rho, dt))
            .collect(),
        dual: partition
            .dual
            .iter()
            .zip(&states.dual)
            .map(|(spec, &own)| dual_update(spec, own, &broadcast.x, rho, dt))
            .collect(),
    })
}

/// A synchronous network of agents solving one LP.
#[derive(Debug, Clone)]
pub struct DistributedLp {
    partition: AgentPartition,
    cfg: RegularizationConfig,
    states: LocalStates,
    round: u64,
}

impl DistributedLp {
    pub fn new(lp: &LinearProgram, cfg: RegularizationConfig) -> Self {
        Self {
            partition: partition(lp),
            cfg,
            states: LocalStates::zeros(lp.n(), lp.m()),
            round: 0,
        }
    }

    pub fn with_states(mut self, states: LocalStates) -> Result<Self> {
        if states.primal.len() != self.partition.n() || states.dual.len() != self.partition.m() {
            return Err(SaddleError::Protocol(
                "local state count does not match the partition".into(),
            ));
        }
        if states.dual.iter().any(|d| d.y < 0.0) {
            return Err(SaddleError::InvalidInit("dual agents must start with y >= 0".into()));
        }
        self.states = states;
        Ok(self)
    }

    pub fn states(&self) -> &LocalStates {
        &self.states
    }

    pub fn partition(&self) -> &AgentPartition {
        &self.partition
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout::Augmented {
            n: self.partition.n(),
            m: self.partition.m(),
        }
    }

    /// Broadcast, gather, update.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let messages = self.states.messages(self.round);
        let broadcast = Broadcast::collect(self.partition.n(), self.partition.m(), self.round, &messages)?;
        self.states = distributed_round(&self.partition, &self.states, &broadcast, self.cfg, dt)?;
        self.round += 1;
        Ok(())
    }

    /// Runs `rounds` rounds, recording every `stride`-th state and the last.
    /// Residuals are left as NaN; the caller decides how to score samples.
    pub fn run(&mut self, rounds: u64, dt: f64, stride: u64) -> Result<Trajectory> {
        let stride = stride.max(1);
        let mut traj = Trajectory::new(self.layout());
        let t0 = self.round;
        traj.push(0.0, &self.states.to_vec(), f64::NAN);
        for k in 1..=rounds {
            self.step(dt)?;
            if k % stride == 0 || k == rounds {
                traj.push((self.round - t0) as f64 * dt, &self.states.to_vec(), f64::NAN);
            }
        }
        Ok(traj)
    }
}
