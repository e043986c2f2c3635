mod common;

use std::sync::Arc;

use saddleflow::flows::{
    plain_field, projected_field, projected_regularized_field, regularized_field, FieldKind, RegularizationConfig,
    StateLayout, VectorField,
};
use saddleflow::integrate::{integrate, step, IntegratorConfig, Scheme, StopKind};
use saddleflow::lp::lagrangian;
use saddleflow::problem::{builtin, QuadraticSaddle};

use common::{random_lp, rng, uniform_vec};

fn circle() -> VectorField {
    plain_field(Arc::new(QuadraticSaddle::scalar_bilinear()))
}

/// Terminal error on the circle `(cos t, sin t)` after integrating to `t_end`.
fn circle_error(scheme: Scheme, dt: f64, t_end: f64) -> f64 {
    let cfg = IntegratorConfig {
        scheme,
        dt,
        t_max: t_end,
        conv_tol: 1e-300,
        record_stride: 1_000_000,
        ..Default::default()
    };
    let (traj, stop) = integrate(&circle(), &[1.0, 0.0], &cfg).unwrap();
    assert_eq!(stop.kind, StopKind::HorizonReached);
    let t = *traj.times.last().unwrap();
    let s = traj.final_state().unwrap();
    ((s[0] - t.cos()).powi(2) + (s[1] - t.sin()).powi(2)).sqrt()
}

#[test]
fn rk4_is_fourth_order_on_the_circle() {
    let coarse = circle_error(Scheme::Rk4, 0.1, 10.0);
    let fine = circle_error(Scheme::Rk4, 0.05, 10.0);
    let factor = coarse / fine;
    assert!((8.0..=32.0).contains(&factor), "factor {factor}");
}

#[test]
fn euler_is_first_order_on_the_circle() {
    let coarse = circle_error(Scheme::Euler, 1e-3, 1.0);
    let fine = circle_error(Scheme::Euler, 5e-4, 1.0);
    let factor = coarse / fine;
    assert!((1.8..=2.2).contains(&factor), "factor {factor}");
}

#[test]
fn identical_runs_are_bit_identical() {
    let mut r = rng(1);
    let lp = random_lp(&mut r);
    let field = projected_regularized_field(Arc::new(lagrangian(&lp)), RegularizationConfig::new(3.0).unwrap());
    let mut init = uniform_vec(&mut r, 2 * lp.n(), -1.0, 1.0);
    init.extend(uniform_vec(&mut r, 2 * lp.m(), 0.0, 1.0));
    let cfg = IntegratorConfig {
        t_max: 20.0,
        ..Default::default()
    };
    let (a, sa) = integrate(&field, &init, &cfg).unwrap();
    let (b, sb) = integrate(&field, &init, &cfg).unwrap();
    assert_eq!(a.times, b.times);
    assert_eq!(a.states, b.states);
    assert_eq!(a.residuals, b.residuals);
    assert_eq!(sa, sb);
}

#[test]
fn projected_trajectories_stay_in_the_orthant() {
    let mut r = rng(2);
    for _ in 0..10 {
        let lp = random_lp(&mut r);
        let prob = Arc::new(lagrangian(&lp));
        let cfg = IntegratorConfig {
            scheme: Scheme::Euler,
            dt: 0.05,
            t_max: 50.0,
            record_stride: 1,
            ..Default::default()
        };
        for field in [
            projected_field(prob.clone()),
            projected_regularized_field(prob.clone(), RegularizationConfig::new(0.5).unwrap()),
        ] {
            let init = vec![0.0; field.dim()];
            let (traj, _) = integrate(&field, &init, &cfg).unwrap();
            for s in &traj.states {
                for (v, &masked) in s.iter().zip(field.nonneg_mask()) {
                    assert!(!masked || *v >= 0.0, "{s:?}");
                }
            }
        }
    }
}

#[test]
fn unprojected_fields_are_never_clamped() {
    // a field pushing every coordinate negative: nothing may stop it without a mask
    let push = VectorField::from_fn(
        FieldKind::Plain,
        StateLayout::Plain { n: 1, m: 1 },
        Vec::new(),
        |_, out| {
            out.fill(-1.0);
            Ok(())
        },
    )
    .unwrap();
    let s = step(&push, Scheme::Rk4, &[0.0, 0.0], 0.5).unwrap();
    assert_eq!(s, vec![-0.5, -0.5]);

    let b = builtin("bilinear-offset").unwrap().problem;
    for field in [
        plain_field(b.clone()),
        regularized_field(b, RegularizationConfig::new(1.0).unwrap()),
    ] {
        assert!(field.nonneg_mask().is_empty());
    }
}

#[test]
fn masked_coordinates_are_clamped_after_the_step() {
    let push = VectorField::from_fn(
        FieldKind::Projected,
        StateLayout::Plain { n: 1, m: 1 },
        vec![false, true],
        |_, out| {
            out.fill(-1.0);
            Ok(())
        },
    )
    .unwrap();
    assert_eq!(
        step(&push, Scheme::Euler, &[0.25, 0.25], 0.5).unwrap(),
        vec![-0.25, 0.0]
    );
}

#[test]
fn plain_bilinear_flow_reaches_the_horizon() {
    let cfg = IntegratorConfig {
        t_max: 50.0,
        ..Default::default()
    };
    let (traj, stop) = integrate(&circle(), &[1.0, 0.0], &cfg).unwrap();
    assert_eq!(stop.kind, StopKind::HorizonReached);
    assert!((traj.times.last().unwrap() - 50.0).abs() < 1e-9);
    assert!(traj.residuals.iter().all(|&r| (r - 1.0).abs() < 1e-9));
}

#[test]
fn exponential_growth_is_classified_as_divergence() {
    // ẋ = x, ẏ = −y: S = −x²/2 − y²/2 is concave in x
    let grow = VectorField::from_fn(
        FieldKind::Plain,
        StateLayout::Plain { n: 1, m: 1 },
        Vec::new(),
        |s, out| {
            out[0] = s[0];
            out[1] = -s[1];
            Ok(())
        },
    )
    .unwrap();
    let cfg = IntegratorConfig {
        dt: 1e-2,
        t_max: 100.0,
        ..Default::default()
    };
    let (traj, stop) = integrate(&grow, &[1.0, 1.0], &cfg).unwrap();
    assert_eq!(stop.kind, StopKind::Diverged, "{stop}");
    assert!(*traj.times.last().unwrap() < 30.0);
}

#[test]
fn negative_masked_initial_state_is_rejected() {
    let field = projected_field(builtin("lp-small").unwrap().problem);
    assert!(integrate(&field, &[0.0, -1.0], &IntegratorConfig::default()).is_err());
}
