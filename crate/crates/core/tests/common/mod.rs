#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saddleflow::lp::LinearProgram;
use saddleflow::problem::SaddleProblem;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut impl Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

/// A feasible, bounded LP with `n, m ≤ 5` and entries of `A` in `[−2, 2]`.
///
/// `c = −Aᵀλ` with `λ > 0` makes the dual feasible; `b = A x₀ + s` with
/// `s > 0` gives a strictly feasible primal point.
pub fn random_lp(rng: &mut impl Rng) -> LinearProgram {
    let n = rng.random_range(1..=5);
    let m = rng.random_range(1..=5);
    let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-2.0..2.0));
    let lambda = DVector::from_vec(uniform_vec(rng, m, 0.1, 1.0));
    let c = -(a.transpose() * lambda);
    let x0 = DVector::from_vec(uniform_vec(rng, n, -1.0, 1.0));
    let s = DVector::from_vec(uniform_vec(rng, m, 0.1, 1.0));
    let b = &a * x0 + s;
    LinearProgram::new(c.iter().copied().collect(), a, b.iter().copied().collect()).unwrap()
}

/// Largest relative error between analytic gradients and central differences
/// with step `1e-5`, measured against `max(1, ‖g‖∞)`.
pub fn gradient_fd_error(prob: &dyn SaddleProblem, x: &[f64], y: &[f64]) -> f64 {
    const H: f64 = 1e-5;
    let (n, m) = (prob.dim_x(), prob.dim_y());
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; m];
    prob.grad_x(x, y, &mut gx).unwrap();
    prob.grad_y(x, y, &mut gy).unwrap();
    let mut fd_x = vec![0.0; n];
    let mut fd_y = vec![0.0; m];
    for i in 0..n {
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[i] += H;
        xm[i] -= H;
        fd_x[i] = (prob.value(&xp, y).unwrap() - prob.value(&xm, y).unwrap()) / (2.0 * H);
    }
    for j in 0..m {
        let (mut yp, mut ym) = (y.to_vec(), y.to_vec());
        yp[j] += H;
        ym[j] -= H;
        fd_y[j] = (prob.value(x, &yp).unwrap() - prob.value(x, &ym).unwrap()) / (2.0 * H);
    }
    let scale = gx.iter().chain(&gy).fold(1.0f64, |s, v| s.max(v.abs()));
    gx.iter()
        .zip(&fd_x)
        .chain(gy.iter().zip(&fd_y))
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0, f64::max)
}
