//! Subcommand execution: build the flow, integrate, monitor, write outputs.

use std::fmt::Write as _;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::Subcommand;
use saddleflow::certificates::{trajectory_monitor, CertificateKind, LyapunovReference, MonitorReport};
use saddleflow::control::{
    example_integrator, run_example_case, ControlSolution, VariableMap, EXAMPLE_RHO, REPORTED_TOLERANCE,
};
use saddleflow::flows::{
    extract_original_saddle, plain_field, projected_field, projected_regularized_field, proximal_field,
    regularized_field, AugmentedState, RegularizationConfig, StateLayout, VectorField, PROX_DEFAULT_TOL,
};
use saddleflow::integrate::{integrate, IntegratorConfig, Scheme, StopKind, StopReason, Trajectory};
use saddleflow::lp::{
    lagrangian, reference_solve, solve, solve_distributed, LinearProgram, LpSolution, ReferenceOutcome,
};
use saddleflow::problem::{ConvexityClass, PointPair, SaddleProblem, SharedProblem};

use crate::config::{Flow, RunConfig};
use crate::export::write_trajectory;
use crate::source::{load_problem, ProblemSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Integrate a flow on a builtin problem or an instance file
    Run,
    /// Solve the built-in two-agent control example and compare to the reported solution
    ReproducePaper,
    /// Solve an LP or control instance with the projected-regularized flow
    SolveLp,
    /// Solve an LP or control instance with synchronous per-agent rounds
    DistributedLp,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::ReproducePaper => "reproduce-paper",
            Command::SolveLp => "solve-lp",
            Command::DistributedLp => "distributed-lp",
        }
    }
}

/// What a completed run produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub stop: StopReason,
    /// 0 converged, 2 horizon reached (or converged off target), 3 diverged.
    pub exit_code: u8,
    pub report: String,
}

pub fn exit_code(kind: StopKind) -> u8 {
    match kind {
        StopKind::Converged => 0,
        StopKind::HorizonReached => 2,
        StopKind::Diverged | StopKind::InnerFailure => 3,
    }
}

/// Runs `cmd`, writes `<out>.trajectory.csv` and `<out>.report.txt`.
///
/// Errors are usage errors: bad settings, unreadable inputs, unwritable outputs.
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<Outcome> {
    let mut run = match cmd {
        Command::ReproducePaper => reproduce_paper(cfg)?,
        Command::Run => {
            let source = load_problem(required_problem(cfg)?)?;
            let flow = cfg.flow.unwrap_or(if source.linear_program().is_some() {
                Flow::ProjectedRegularized
            } else {
                Flow::Regularized
            });
            general(cfg, source, flow)?
        }
        Command::SolveLp | Command::DistributedLp => {
            let source = load_problem(required_problem(cfg)?)?;
            if source.linear_program().is_none() {
                bail!("field `problem`: {} needs an LP or control instance file", cmd.name());
            }
            let flow = if cmd == Command::SolveLp {
                Flow::ProjectedRegularized
            } else {
                Flow::Distributed
            };
            if cfg.flow.is_some_and(|f| f != flow) {
                bail!("field `flow`: {} always uses the {flow} flow", cmd.name());
            }
            general(cfg, source, flow)?
        }
    };
    let mut report = format!("command: {}\n", cmd.name());
    report.push_str(&run.report);
    run.report = report;

    let csv = cfg.trajectory_path();
    write_trajectory(&run.trajectory, &csv).context("field `out`")?;
    let report_path = cfg.report_path();
    std::fs::write(&report_path, &run.report)
        .with_context(|| format!("field `out`: cannot write {}", report_path.display()))?;
    Ok(Outcome {
        stop: run.stop,
        exit_code: run.exit_code,
        report: run.report,
    })
}

struct Finished {
    trajectory: Trajectory,
    stop: StopReason,
    exit_code: u8,
    report: String,
}

fn required_problem(cfg: &RunConfig) -> Result<&str> {
    cfg.problem
        .as_deref()
        .ok_or_else(|| anyhow!("field `problem` is required"))
}

fn general(cfg: &RunConfig, source: ProblemSource, flow: Flow) -> Result<Finished> {
    if flow.is_projected() && !source.has_orthant() {
        bail!(
            "field `flow`: {flow} needs a problem with a nonnegative multiplier block; {} has none",
            source.describe()
        );
    }
    if flow == Flow::Distributed && source.linear_program().is_none() {
        bail!("field `flow`: distributed rounds need an LP or control instance file");
    }
    let mut base = IntegratorConfig::default();
    if flow == Flow::Distributed {
        if cfg.scheme == Some(Scheme::Rk4) {
            bail!("field `scheme`: distributed rounds are Euler steps");
        }
        base.scheme = Scheme::Euler;
    }
    let icfg = cfg.integrator(base)?;
    let rho = cfg.rho()?;
    let reg = RegularizationConfig::new(rho).map_err(|e| anyhow!("field `rho`: {e}"))?;

    let prob: SharedProblem = match &source {
        ProblemSource::Builtin(b) => b.problem.clone(),
        ProblemSource::Lp(lp) | ProblemSource::Control { lp, .. } => Arc::new(lagrangian(lp)),
    };
    let (n, m) = (prob.dim_x(), prob.dim_y());

    let mut report = String::new();
    let _ = writeln!(report, "problem: {}", source.describe());
    let _ = writeln!(report, "flow: {flow}");
    if matches!(flow, Flow::Regularized | Flow::ProjectedRegularized | Flow::Distributed) {
        let _ = writeln!(report, "rho: {rho}");
    }
    write_integrator(&mut report, &icfg);

    let (mut trajectory, stop, lp_solution) = match (flow, source.linear_program()) {
        (Flow::ProjectedRegularized | Flow::Distributed, Some(lp)) => {
            let init = match &cfg.init {
                Some(v) => Some(augmented_init(v, n, m)?),
                None => None,
            };
            let sol = if flow == Flow::Distributed {
                let states = init.map(|st| to_local_states(&st));
                solve_distributed(lp, reg, &icfg, states)
            } else {
                solve(lp, reg, &icfg, init.as_ref())
            }
            .map_err(|e| anyhow!("{e}"))?;
            (sol.trajectory.clone(), sol.stop.clone(), Some(sol))
        }
        _ => {
            let field = build_field(flow, prob.clone(), reg)?;
            let init = match &cfg.init {
                Some(v) => {
                    if v.len() != field.dim() {
                        bail!("field `init`: expected {} values, got {}", field.dim(), v.len());
                    }
                    v.clone()
                }
                None => default_init(&source, field.layout()),
            };
            let (traj, stop) = integrate(&field, &init, &icfg).map_err(|e| anyhow!("field `init`: {e}"))?;
            (traj, stop, None)
        }
    };

    let limit = limit_point(&trajectory, &stop, icfg.conv_tol, rho);
    let reference = match &source {
        ProblemSource::Builtin(b) => Some((LyapunovReference::user(b.saddle.clone()), "known saddle")),
        ProblemSource::Lp(lp) | ProblemSource::Control { lp, .. } => match &limit {
            Some(p) => Some((LyapunovReference::flow_limit(p.clone()), "flow limit")),
            None => oracle_reference(lp),
        },
    };
    let monitor = match &reference {
        Some((r, _)) => {
            let kind = certificate_for(flow, prob.as_ref(), reg, PROX_DEFAULT_TOL, r);
            Some(trajectory_monitor(r, kind, &mut trajectory).map_err(|e| anyhow!("monitor: {e}"))?)
        }
        None => None,
    };

    write_stop(&mut report, &trajectory, &stop);
    write_monitor(&mut report, monitor.as_ref(), reference.as_ref().map(|(_, s)| *s));
    if let Some(p) = &limit {
        let _ = writeln!(report, "saddle_x: {}", join(&p.x));
        let _ = writeln!(report, "saddle_y: {}", join(&p.y));
    }
    if let (Some(lp), Some(sol)) = (source.linear_program(), &lp_solution) {
        write_lp(&mut report, lp, sol);
        if let ProblemSource::Control { problem, map, .. } = &source {
            let (u, _) = map.recombine(&sol.point.x);
            if let Ok(ctl) = ControlSolution::from_inputs(problem, u) {
                for (t, u) in ctl.u.iter().enumerate() {
                    let _ = writeln!(report, "u({t}): {}", join(u));
                }
                for (t, x) in ctl.x.iter().enumerate() {
                    let _ = writeln!(report, "x({}): {}", t + 1, join(x));
                }
                let _ = writeln!(report, "control_objective: {}", ctl.objective);
                let _ = writeln!(report, "final_state_violation: {:e}", ctl.final_violation(problem));
                let _ = writeln!(report, "split_overlap: {:e}", map.split_overlap(&sol.point.x));
            }
            write_variable_names(&mut report, map);
        }
    }
    Ok(Finished {
        trajectory,
        exit_code: exit_code(stop.kind),
        stop,
        report,
    })
}

fn build_field(flow: Flow, prob: SharedProblem, reg: RegularizationConfig) -> Result<VectorField> {
    Ok(match flow {
        Flow::Plain => plain_field(prob),
        Flow::Regularized => regularized_field(prob, reg),
        Flow::Projected => projected_field(prob),
        Flow::ProjectedRegularized => projected_regularized_field(prob, reg),
        Flow::Proximal => proximal_field(prob, PROX_DEFAULT_TOL).map_err(|e| anyhow!("field `flow`: {e}"))?,
        Flow::Distributed => unreachable!("distributed runs go through the LP path"),
    })
}

/// Builtins start from `x = 1` with every other block at zero; LPs from zero.
fn default_init(source: &ProblemSource, layout: StateLayout) -> Vec<f64> {
    let mut init = vec![0.0; layout.dim()];
    if let ProblemSource::Builtin(_) = source {
        let (n, _) = layout.dims();
        init[..n].fill(1.0);
    }
    init
}

fn augmented_init(v: &[f64], n: usize, m: usize) -> Result<AugmentedState> {
    AugmentedState::from_slice(n, m, v)
        .map_err(|_| anyhow!("field `init`: expected {} values, got {}", 2 * (n + m), v.len()))
}

fn to_local_states(st: &AugmentedState) -> saddleflow::lp::LocalStates {
    let mut states = saddleflow::lp::LocalStates::zeros(st.x.len(), st.y.len());
    for (i, s) in states.primal.iter_mut().enumerate() {
        s.x = st.x[i];
        s.z = st.z[i];
    }
    for (j, s) in states.dual.iter_mut().enumerate() {
        s.y = st.y[j];
        s.w = st.w[j];
    }
    states
}

/// The original-coordinate limit of a converged run.
fn limit_point(traj: &Trajectory, stop: &StopReason, tol: f64, rho: f64) -> Option<PointPair> {
    if stop.kind != StopKind::Converged {
        return None;
    }
    let last = traj.final_state()?;
    match traj.layout {
        StateLayout::Augmented { n, m } => {
            let st = AugmentedState::from_slice(n, m, last).ok()?;
            extract_original_saddle(&st, rho * tol * (1.0 + 1e-9)).ok()
        }
        layout => Some(layout.primary_pair(last)),
    }
}

fn oracle_reference(lp: &LinearProgram) -> Option<(LyapunovReference, &'static str)> {
    match reference_solve(lp).ok()? {
        ReferenceOutcome::Optimal { x, y, .. } => {
            Some((LyapunovReference::user(PointPair::new(x, y)), "vertex enumeration"))
        }
        _ => None,
    }
}

fn certificate_for<'a>(
    flow: Flow,
    prob: &'a dyn SaddleProblem,
    reg: RegularizationConfig,
    tol: f64,
    reference: &LyapunovReference,
) -> CertificateKind<'a> {
    let has_value = prob.value(&reference.point.x, &reference.point.y).is_ok();
    match flow {
        Flow::Regularized | Flow::ProjectedRegularized | Flow::Distributed => CertificateKind::Separable(reg),
        Flow::Proximal => CertificateKind::Proximal { prob, tol },
        Flow::Plain if prob.convexity() == ConvexityClass::StrictlyConvexConcave && has_value => {
            CertificateKind::Strict(prob)
        }
        Flow::Plain | Flow::Projected if has_value => CertificateKind::SaddleGap(prob),
        Flow::Plain | Flow::Projected => CertificateKind::None,
    }
}

fn reproduce_paper(cfg: &RunConfig) -> Result<Finished> {
    if let Some(p) = &cfg.problem {
        bail!("field `problem`: reproduce-paper uses the built-in control instance, got `{p}`");
    }
    if cfg.flow.is_some_and(|f| f != Flow::ProjectedRegularized) {
        bail!("field `flow`: reproduce-paper always uses the projected-regularized flow");
    }
    if cfg.rho_or(EXAMPLE_RHO)? != EXAMPLE_RHO {
        bail!("field `rho`: reproduce-paper runs at rho = {EXAMPLE_RHO}");
    }
    if cfg.init.is_some() {
        bail!("field `init`: reproduce-paper starts from zero");
    }
    let icfg = cfg.integrator(example_integrator())?;
    let run = run_example_case(&icfg).map_err(|e| anyhow!("{e}"))?;
    let mut trajectory = run.lp_solution.trajectory.clone();
    let stop = run.lp_solution.stop.clone();
    let reg = RegularizationConfig::new(EXAMPLE_RHO).expect("positive");

    let mut report = String::new();
    let _ = writeln!(
        report,
        "problem: built-in control instance N = 2, T = 2 (LP with n = {}, m = {})",
        run.lp.n(),
        run.lp.m()
    );
    let _ = writeln!(report, "flow: projected-regularized");
    let _ = writeln!(report, "rho: {EXAMPLE_RHO}");
    write_integrator(&mut report, &icfg);
    let limit = limit_point(&trajectory, &stop, icfg.conv_tol, EXAMPLE_RHO);
    let monitor = match &limit {
        Some(p) => {
            let r = LyapunovReference::flow_limit(p.clone());
            Some(
                trajectory_monitor(&r, CertificateKind::Separable(reg), &mut trajectory)
                    .map_err(|e| anyhow!("monitor: {e}"))?,
            )
        }
        None => None,
    };
    write_stop(&mut report, &trajectory, &stop);
    write_monitor(&mut report, monitor.as_ref(), limit.as_ref().map(|_| "flow limit"));
    write_lp(&mut report, &run.lp, &run.lp_solution);
    write_variable_names(&mut report, &run.map);

    let d = &run.diagnostics;
    let _ = writeln!(report, "tolerance: {REPORTED_TOLERANCE}");
    for dist in &d.distances {
        let _ = writeln!(
            report,
            "distance {}: computed {:.6}, reported {:.4}, |diff| {:.3e}",
            dist.label,
            dist.computed,
            dist.reported,
            dist.abs()
        );
    }
    let _ = writeln!(report, "max_distance: {:.3e}", d.max_distance);
    let _ = writeln!(report, "final_state_dual: {}", d.final_dual);
    let _ = writeln!(report, "final_state_dual_min: {}", d.final_dual_min);
    let _ = writeln!(report, "split_overlap: {:e}", d.split_overlap);
    let _ = writeln!(report, "final_state_violation: {:e}", d.final_violation);
    let _ = writeln!(report, "runtime_seconds: {:.3}", d.elapsed.as_secs_f64());
    let reproduced = stop.kind == StopKind::Converged && d.within_tolerance() && d.final_dual_min >= 0.0;
    let _ = writeln!(report, "reproduced: {}", if reproduced { "yes" } else { "no" });

    let exit_code = match stop.kind {
        StopKind::Converged if !reproduced => 2,
        kind => exit_code(kind),
    };
    Ok(Finished {
        trajectory,
        stop,
        exit_code,
        report,
    })
}

fn write_integrator(report: &mut String, icfg: &IntegratorConfig) {
    let _ = writeln!(report, "scheme: {}", icfg.scheme);
    let _ = writeln!(report, "dt: {}", icfg.dt);
    let _ = writeln!(report, "t_max: {}", icfg.t_max);
    let _ = writeln!(report, "tol: {:e}", icfg.conv_tol);
    let _ = writeln!(report, "stride: {}", icfg.record_stride);
}

fn write_stop(report: &mut String, traj: &Trajectory, stop: &StopReason) {
    let _ = writeln!(report, "stop: {}", stop.kind);
    let _ = writeln!(report, "stop_detail: {}", stop.detail);
    let _ = writeln!(report, "samples: {}", traj.len());
    let _ = writeln!(report, "final_t: {}", traj.times.last().copied().unwrap_or(f64::NAN));
    let _ = writeln!(
        report,
        "final_residual: {:e}",
        traj.final_residual().unwrap_or(f64::NAN)
    );
}

fn write_monitor(report: &mut String, monitor: Option<&MonitorReport>, source: Option<&str>) {
    match (monitor, source) {
        (Some(m), Some(source)) => {
            let _ = writeln!(report, "reference: {source}");
            let _ = writeln!(report, "final_V: {:e}", m.final_lyapunov);
            let _ = writeln!(report, "final_h1: {:e}", m.terminal_h.h1);
            let _ = writeln!(report, "final_h2: {:e}", m.terminal_h.h2);
            let _ = writeln!(report, "max_V_increase: {:e}", m.max_lyapunov_increase);
        }
        _ => {
            let _ = writeln!(
                report,
                "reference: none (run did not converge and no oracle optimum exists)"
            );
            let _ = writeln!(report, "final_h1: undefined");
            let _ = writeln!(report, "final_h2: undefined");
        }
    }
}

fn write_lp(report: &mut String, lp: &LinearProgram, sol: &LpSolution) {
    if let Some(d) = sol.diagnosis() {
        let _ = writeln!(report, "diagnosis: {d}");
    }
    let kkt = lp.kkt_residuals(&sol.point);
    let _ = writeln!(report, "objective: {}", lp.objective(&sol.point.x));
    let _ = writeln!(report, "x: {}", join(&sol.point.x));
    let _ = writeln!(report, "y: {}", join(&sol.point.y));
    let _ = writeln!(report, "kkt_stationarity: {:e}", kkt.stationarity);
    let _ = writeln!(report, "kkt_dual_infeasibility: {:e}", kkt.dual_infeasibility);
    let _ = writeln!(report, "kkt_primal_infeasibility: {:e}", kkt.primal_infeasibility);
    let _ = writeln!(report, "kkt_complementarity: {:e}", kkt.complementarity);
}

/// Maps the generic `x1, x2, ...` CSV columns to split control variables.
fn write_variable_names(report: &mut String, map: &VariableMap) {
    let names: Vec<String> = map
        .variable_names()
        .iter()
        .enumerate()
        .map(|(i, name)| format!("x{}={name}", i + 1))
        .collect();
    let _ = writeln!(report, "variables: {}", names.join(" "));
}

fn join(v: &[f64]) -> String {
    v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ")
}
