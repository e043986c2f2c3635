mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;
use saddleflow::flows::{augment, RegularizationConfig};
use saddleflow::lp::lagrangian;
use saddleflow::problem::{
    builtin, check_saddle_inequality, stationarity_residual, ConvexityClass, FnProblem, PointPair, SaddleProblem,
    SharedProblem, BUILTIN_NAMES,
};

use common::{gradient_fd_error, random_lp, rng, uniform_vec};

const FD_TOL: f64 = 1e-6;
const FD_POINTS: usize = 100;

fn fd_sweep(prob: &dyn SaddleProblem, seed: u64) -> f64 {
    let mut r = rng(seed);
    (0..FD_POINTS)
        .map(|_| {
            let x = uniform_vec(&mut r, prob.dim_x(), -3.0, 3.0);
            let y = uniform_vec(&mut r, prob.dim_y(), -3.0, 3.0);
            gradient_fd_error(prob, &x, &y)
        })
        .fold(0.0, f64::max)
}

#[test]
fn builtin_gradients_match_finite_differences() {
    for (k, name) in BUILTIN_NAMES.iter().enumerate() {
        let b = builtin(name).unwrap();
        let err = fd_sweep(b.problem.as_ref(), k as u64);
        assert!(err <= FD_TOL, "{name}: {err:e}");
    }
}

#[test]
fn augmented_gradients_match_finite_differences() {
    for (k, name) in BUILTIN_NAMES.iter().enumerate() {
        for rho in [0.5, 1.0, 3.0] {
            let aug = augment(builtin(name).unwrap().problem, RegularizationConfig::new(rho).unwrap());
            let err = fd_sweep(&aug, 100 + k as u64);
            assert!(err <= FD_TOL, "{name} rho={rho}: {err:e}");
        }
    }
    let mut r = rng(7);
    for k in 0..10 {
        let lp = random_lp(&mut r);
        let aug = augment(Arc::new(lagrangian(&lp)), RegularizationConfig::new(3.0).unwrap());
        let err = fd_sweep(&aug, 200 + k);
        assert!(err <= FD_TOL, "random LP {k}: {err:e}");
    }
}

#[test]
fn nonquadratic_closure_problem_matches_finite_differences() {
    // S = log(1 + eˣ) + xy − y²/2
    let prob = FnProblem::new(
        1,
        1,
        ConvexityClass::ConvexConcave,
        |x, y, out| {
            out[0] = 1.0 / (1.0 + (-x[0]).exp()) + y[0];
            Ok(())
        },
        |x, y, out| {
            out[0] = x[0] - y[0];
            Ok(())
        },
    )
    .unwrap()
    .with_value(|x, y| Ok((1.0 + x[0].exp()).ln() + x[0] * y[0] - 0.5 * y[0] * y[0]));
    assert!(fd_sweep(&prob, 9) <= FD_TOL);
}

#[test]
fn known_saddles_satisfy_the_saddle_inequality() {
    for name in BUILTIN_NAMES {
        let b = builtin(name).unwrap();
        let (n, m) = (b.problem.dim_x(), b.problem.dim_y());
        let mut r = rng(11);
        let report = check_saddle_inequality(
            b.problem.as_ref(),
            &b.saddle,
            || PointPair::new(uniform_vec(&mut r, n, -5.0, 5.0), uniform_vec(&mut r, m, -5.0, 5.0)),
            1000,
        )
        .unwrap();
        assert!(report.passed, "{name}: {report:?}");
        assert_eq!(report.candidate_residual, 0.0, "{name}");
    }
}

#[test]
fn off_saddle_candidate_is_reported() {
    let b = builtin("quadratic").unwrap();
    let mut r = rng(12);
    let report = check_saddle_inequality(
        b.problem.as_ref(),
        &PointPair::new(vec![1.0], vec![0.0]),
        || PointPair::new(vec![r.random_range(-2.0..2.0)], vec![r.random_range(-2.0..2.0)]),
        500,
    )
    .unwrap();
    assert!(!report.passed);
    assert!(report.candidate_residual > 0.0);
    assert!(report.worst_sample.is_some());
}

fn any_builtin() -> impl Strategy<Value = &'static str> {
    prop::sample::select(BUILTIN_NAMES.to_vec())
}

fn problem(name: &str) -> SharedProblem {
    builtin(name).unwrap().problem
}

proptest! {
    #[test]
    fn residual_is_zero_exactly_at_vanishing_gradients(
        name in any_builtin(),
        seed in any::<u64>(),
    ) {
        let prob = problem(name);
        let mut r = rng(seed);
        let p = PointPair::new(
            uniform_vec(&mut r, prob.dim_x(), -10.0, 10.0),
            uniform_vec(&mut r, prob.dim_y(), -10.0, 10.0),
        );
        let res = stationarity_residual(prob.as_ref(), &p).unwrap();
        let mut gx = vec![0.0; prob.dim_x()];
        let mut gy = vec![0.0; prob.dim_y()];
        prob.grad_x(&p.x, &p.y, &mut gx).unwrap();
        prob.grad_y(&p.x, &p.y, &mut gy).unwrap();
        let all_zero = gx.iter().chain(&gy).all(|&g| g == 0.0);
        prop_assert!(res >= 0.0);
        prop_assert_eq!(res == 0.0, all_zero);
    }

    #[test]
    fn augmented_value_on_aligned_states_is_original(
        name in any_builtin(),
        rho in 0.1f64..10.0,
        seed in any::<u64>(),
    ) {
        let prob = problem(name);
        let mut r = rng(seed);
        let x = uniform_vec(&mut r, prob.dim_x(), -10.0, 10.0);
        let y = uniform_vec(&mut r, prob.dim_y(), -10.0, 10.0);
        let aug = augment(prob.clone(), RegularizationConfig::new(rho).unwrap());
        let xx: Vec<f64> = x.iter().chain(&x).copied().collect();
        let yy: Vec<f64> = y.iter().chain(&y).copied().collect();
        prop_assert_eq!(aug.value(&xx, &yy).unwrap(), prob.value(&x, &y).unwrap());
    }
}

#[test]
fn dimension_mismatch_is_an_error() {
    let b = builtin("bilinear-offset").unwrap();
    let err = stationarity_residual(b.problem.as_ref(), &PointPair::new(vec![0.0], vec![0.0, 0.0])).unwrap_err();
    assert!(err.to_string().contains("dimension mismatch"), "{err}");
}
