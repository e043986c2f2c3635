mod common;

use std::sync::Arc;

use saddleflow::control::{build_lp, ControlProblem};
use saddleflow::flows::{projected_regularized_field, RegularizationConfig};
use saddleflow::integrate::{IntegratorConfig, Scheme, Stepper, StopKind};
use saddleflow::lp::distributed::LocalStates;
use saddleflow::lp::{
    lagrangian, reference_solve, solve, solve_distributed, DistributedLp, LinearProgram, ReferenceOutcome, DEFAULT_RHO,
};

use common::{random_lp, rng};

const OBJECTIVE_TOL: f64 = 1e-4;
const KKT_TOL: f64 = 1e-4;

/// Random programs can be badly conditioned (smallest singular value of `A`
/// near 0.02), which slows convergence to rates near 1e-4; a coarser step
/// with a long horizon keeps the suite fast. The flow is not stiff here.
fn oracle_suite_integrator() -> IntegratorConfig {
    IntegratorConfig {
        dt: 1e-2,
        t_max: 1e5,
        ..Default::default()
    }
}

#[test]
fn flow_matches_enumeration_on_random_programs() {
    let mut r = rng(2024);
    let cfg = RegularizationConfig::new(DEFAULT_RHO).unwrap();
    let icfg = oracle_suite_integrator();
    for k in 0..60 {
        let lp = random_lp(&mut r);
        let oracle = reference_solve(&lp).unwrap();
        let expected = oracle.objective().expect("bounded and feasible by construction");
        let sol = solve(&lp, cfg, &icfg, None).unwrap();
        assert!(sol.converged(), "LP {k}: {}\n{}", sol.stop, lp.to_text());
        let got = lp.objective(&sol.point.x);
        assert!((got - expected).abs() <= OBJECTIVE_TOL, "LP {k}: {got} vs {expected}");
        let kkt = lp.kkt_residuals(&sol.point);
        assert!(kkt.stationarity <= KKT_TOL, "LP {k}: {kkt:?}");
        assert!(kkt.complementarity <= KKT_TOL, "LP {k}: {kkt:?}");
        assert!(kkt.primal_infeasibility <= KKT_TOL, "LP {k}: {kkt:?}");
        assert!(sol.point.y.iter().all(|&y| y >= 0.0), "LP {k}");
    }
}

#[test]
fn example_program_matches_enumeration() {
    let (lp, _) = build_lp(&ControlProblem::example_instance());
    let expected = reference_solve(&lp).unwrap().objective().unwrap();
    // hand-checked optimum 486.96/21
    assert!((expected - 23.188_571_428_571_43).abs() < 1e-9, "{expected}");
    let sol = solve(
        &lp,
        RegularizationConfig::new(3.0).unwrap(),
        &IntegratorConfig::default(),
        None,
    )
    .unwrap();
    assert!(sol.converged(), "{}", sol.stop);
    assert!((lp.objective(&sol.point.x) - expected).abs() <= 1e-3);
}

/// Centralized Euler on the projected-regularized field, every state kept.
fn centralized_euler(lp: &LinearProgram, rho: f64, dt: f64, rounds: usize) -> Vec<Vec<f64>> {
    let field = projected_regularized_field(Arc::new(lagrangian(lp)), RegularizationConfig::new(rho).unwrap());
    let mut stepper = Stepper::new(&field, Scheme::Euler);
    let mut state = vec![0.0; field.dim()];
    let mut out = vec![state.clone()];
    for _ in 0..rounds {
        stepper.advance(&mut state, dt).unwrap();
        out.push(state.clone());
    }
    out
}

fn assert_bit_identical(lp: &LinearProgram, rho: f64, dt: f64, rounds: usize) {
    let central = centralized_euler(lp, rho, dt, rounds);
    let mut dist = DistributedLp::new(lp, RegularizationConfig::new(rho).unwrap());
    let traj = dist.run(rounds as u64, dt, 1).unwrap();
    assert_eq!(traj.states.len(), central.len());
    for (k, (a, b)) in traj.states.iter().zip(&central).enumerate() {
        let same = a.iter().zip(b).all(|(p, q)| p.to_bits() == q.to_bits());
        assert!(same, "round {k} differs:\n{a:?}\n{b:?}");
    }
}

#[test]
fn distributed_rounds_reproduce_centralized_euler_on_example_program() {
    let (lp, _) = build_lp(&ControlProblem::example_instance());
    assert_bit_identical(&lp, 3.0, 1e-3, 20_000);
}

#[test]
fn distributed_rounds_reproduce_centralized_euler_on_random_programs() {
    let mut r = rng(77);
    for k in 0..10 {
        let lp = random_lp(&mut r);
        let dt = [1e-3, 1e-2, 0.05][k % 3];
        assert_bit_identical(&lp, [0.5, 1.0, 3.0][k % 3], dt, 5_000);
    }
}

#[test]
fn distributed_rounds_from_a_nonzero_start() {
    let mut r = rng(78);
    let lp = random_lp(&mut r);
    let (n, m) = (lp.n(), lp.m());
    let init: Vec<f64> = (0..2 * (n + m))
        .map(|k| if k < 2 * n { k as f64 - 1.5 } else { 0.25 * k as f64 })
        .collect();
    let field = projected_regularized_field(Arc::new(lagrangian(&lp)), RegularizationConfig::new(2.0).unwrap());
    let mut stepper = Stepper::new(&field, Scheme::Euler);
    let mut state = init.clone();

    let mut states = LocalStates::zeros(n, m);
    for i in 0..n {
        states.primal[i].x = init[i];
        states.primal[i].z = init[n + i];
    }
    for j in 0..m {
        states.dual[j].y = init[2 * n + j];
        states.dual[j].w = init[2 * n + m + j];
    }
    let mut dist = DistributedLp::new(&lp, RegularizationConfig::new(2.0).unwrap())
        .with_states(states)
        .unwrap();
    for _ in 0..2_000 {
        stepper.advance(&mut state, 1e-2).unwrap();
        dist.step(1e-2).unwrap();
        assert_eq!(dist.states().to_vec(), state);
    }
}

#[test]
fn distributed_solve_agrees_with_enumeration() {
    let mut r = rng(79);
    let cfg = RegularizationConfig::new(DEFAULT_RHO).unwrap();
    let icfg = IntegratorConfig {
        scheme: Scheme::Euler,
        ..oracle_suite_integrator()
    };
    for k in 0..10 {
        let lp = random_lp(&mut r);
        let expected = reference_solve(&lp).unwrap().objective().unwrap();
        let sol = solve_distributed(&lp, cfg, &icfg, None).unwrap();
        assert!(sol.converged(), "LP {k}: {}", sol.stop);
        let got = lp.objective(&sol.point.x);
        assert!((got - expected).abs() <= OBJECTIVE_TOL, "LP {k}: {got} vs {expected}");
        assert!(sol.trajectory.residuals.iter().all(|r| r.is_finite()));
    }
}

#[test]
fn distributed_solve_requires_euler_steps() {
    let lp = LinearProgram::from_rows(vec![1.0], &[vec![-1.0]], vec![-1.0]).unwrap();
    let cfg = RegularizationConfig::new(1.0).unwrap();
    assert!(solve_distributed(&lp, cfg, &IntegratorConfig::default(), None).is_err());
    let icfg = IntegratorConfig {
        scheme: Scheme::Euler,
        dt: 1e-2,
        t_max: 200.0,
        ..Default::default()
    };
    let infeasible = LinearProgram::from_rows(vec![0.0], &[vec![1.0], vec![-1.0]], vec![-1.0, -1.0]).unwrap();
    let sol = solve_distributed(&infeasible, cfg, &icfg, None).unwrap();
    assert_eq!(sol.stop.kind, StopKind::Diverged, "{}", sol.stop);
}

#[test]
fn infeasible_program_is_reported_as_divergent() {
    // x ≤ −1 and x ≥ 1
    let lp = LinearProgram::from_rows(vec![0.0], &[vec![1.0], vec![-1.0]], vec![-1.0, -1.0]).unwrap();
    assert_eq!(reference_solve(&lp).unwrap(), ReferenceOutcome::Infeasible);
    let icfg = IntegratorConfig {
        dt: 1e-2,
        t_max: 200.0,
        ..Default::default()
    };
    let sol = solve(&lp, RegularizationConfig::new(1.0).unwrap(), &icfg, None).unwrap();
    assert_eq!(sol.stop.kind, StopKind::Diverged, "{}", sol.stop);
    assert!(sol.diagnosis().unwrap().contains("infeasible"));
}

#[test]
fn unbounded_program_is_reported_as_divergent() {
    // max x1 subject to x1 − x2 ≤ 1, x2 ≥ 0: x1 rises with x2
    let lp = LinearProgram::from_rows(vec![-1.0, 0.0], &[vec![1.0, -1.0], vec![0.0, -1.0]], vec![1.0, 0.0]).unwrap();
    assert_eq!(reference_solve(&lp).unwrap(), ReferenceOutcome::Unbounded);
    let icfg = IntegratorConfig {
        dt: 1e-2,
        t_max: 200.0,
        ..Default::default()
    };
    let sol = solve(&lp, RegularizationConfig::new(1.0).unwrap(), &icfg, None).unwrap();
    assert_eq!(sol.stop.kind, StopKind::Diverged, "{}", sol.stop);
}

#[test]
fn text_format_round_trips_random_programs() {
    let mut r = rng(5);
    for _ in 0..20 {
        let lp = random_lp(&mut r);
        let back: LinearProgram = lp.to_text().parse().unwrap();
        assert_eq!(back, lp);
    }
}

#[test]
fn malformed_program_text_names_the_line() {
    let err = "2 1\n1 1\n1 x 3\n".parse::<LinearProgram>().unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
    assert!("2 1\n1 1\n1 2\n".parse::<LinearProgram>().is_err());
}
