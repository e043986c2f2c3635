//! Exhaustive basic-solution enumeration for small LPs.
//!
//! Let `r = rank(A)`. Every choice `B` of `r` linearly independent rows gives
//! one primal basic solution (the point of `rowspace(A)` with `A_B x = b_B`)
//! and one dual basic solution (`A_Bᵀ y_B = −c`, zero elsewhere). The primal
//! optimum is the best feasible primal basic solution and the dual optimum the
//! best feasible dual one; which of the two sets is empty decides between
//! infeasible and unbounded.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SaddleError};
use crate::lp::LinearProgram;

/// Largest number of candidate bases `C(m, rank A)` the enumerator will visit.
pub const ENUMERATION_CAP: u128 = 5_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceOutcome {
    Optimal { x: Vec<f64>, y: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

impl ReferenceOutcome {
    pub fn objective(&self) -> Option<f64> {
        match self {
            ReferenceOutcome::Optimal { objective, .. } => Some(*objective),
            _ => None,
        }
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    debug_assert!(k <= n);
    let k = k.min(n - k);
    (0..k as u128).fold(1u128, |acc, i| acc.saturating_mul(n as u128 - i) / (i + 1))
}

/// Solves a small LP by enumerating basic solutions of the primal and the dual.
pub fn reference_solve(lp: &LinearProgram) -> Result<ReferenceOutcome> {
    let (n, m) = (lp.n(), lp.m());
    let a = lp.a();
    let c = DVector::from_column_slice(lp.c());
    let b = lp.b();
    let scale = a.iter().chain(lp.c()).chain(b).fold(1.0f64, |s, v| s.max(v.abs()));
    let feas_tol = 1e-9 * scale;
    let rank = if m == 0 { 0 } else { a.rank(1e-10 * scale) };
    let candidates = binomial(m, rank);
    if candidates > ENUMERATION_CAP {
        return Err(SaddleError::UnsupportedScale {
            candidates,
            cap: ENUMERATION_CAP,
        });
    }

    let mut best_primal: Option<(f64, Vec<f64>)> = None;
    let mut best_dual: Option<(f64, Vec<f64>)> = None;
    let mut consider = |x: Option<DVector<f64>>, y_basic: Option<DVector<f64>>, rows: &[usize]| {
        if let Some(x) = x {
            let feasible = (0..m).all(|j| a.row(j).dot(&x.transpose()) - b[j] <= feas_tol);
            if feasible {
                let obj = c.dot(&x);
                if best_primal.as_ref().is_none_or(|(o, _)| obj < *o) {
                    best_primal = Some((obj, x.iter().copied().collect()));
                }
            }
        }
        if let Some(yb) = y_basic {
            if yb.iter().all(|&v| v >= -feas_tol) {
                let mut y = vec![0.0; m];
                for (k, &j) in rows.iter().enumerate() {
                    y[j] = yb[k].max(0.0);
                }
                // dual objective −bᵀy
                let obj = -rows.iter().map(|&j| b[j] * y[j]).sum::<f64>();
                if best_dual.as_ref().is_none_or(|(o, _)| obj > *o) {
                    best_dual = Some((obj, y));
                }
            }
        }
    };

    if rank == 0 {
        let x = DVector::zeros(n);
        let dual_feasible = c.amax() <= feas_tol;
        consider(Some(x), dual_feasible.then(|| DVector::zeros(0)), &[]);
    } else {
        for rows in (0..m).combinations(rank) {
            let sub = a.select_rows(rows.iter());
            let bb = DVector::from_iterator(rank, rows.iter().map(|&j| b[j]));
            let (x, y) = if rank == n {
                basic_square(&sub, &bb, &c)
            } else {
                basic_wide(&sub, &bb, &c, feas_tol)
            };
            consider(x, y, &rows);
        }
    }

    Ok(match (best_primal, best_dual) {
        (None, _) => ReferenceOutcome::Infeasible,
        (Some(_), None) => ReferenceOutcome::Unbounded,
        (Some((objective, x)), Some((_, y))) => ReferenceOutcome::Optimal { x, y, objective },
    })
}

/// Relative pivot size below which a basis is treated as singular.
const PIVOT_TOL: f64 = 1e-11;

fn well_conditioned(u_diag: impl Iterator<Item = f64>) -> bool {
    let (lo, hi) = u_diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| {
        (lo.min(d.abs()), hi.max(d.abs()))
    });
    hi > 0.0 && lo > PIVOT_TOL * hi
}

/// `A_B` square: `x = A_B⁻¹ b_B`, `y_B = −A_B⁻ᵀ c`.
fn basic_square(
    sub: &DMatrix<f64>,
    bb: &DVector<f64>,
    c: &DVector<f64>,
) -> (Option<DVector<f64>>, Option<DVector<f64>>) {
    let lu = sub.clone().full_piv_lu();
    if !well_conditioned(lu.u().diagonal().iter().copied()) {
        return (None, None);
    }
    let x = lu.solve(bb);
    let y = sub.transpose().full_piv_lu().solve(&(-c));
    (x, y)
}

/// `A_B` wide (`r < n`): primal `x = A_Bᵀ (A_B A_Bᵀ)⁻¹ b_B`; dual from the
/// normal equations, accepted only when `A_Bᵀ y_B = −c` holds.
fn basic_wide(
    sub: &DMatrix<f64>,
    bb: &DVector<f64>,
    c: &DVector<f64>,
    tol: f64,
) -> (Option<DVector<f64>>, Option<DVector<f64>>) {
    let gram = sub * sub.transpose();
    let lu = gram.full_piv_lu();
    if !well_conditioned(lu.u().diagonal().iter().copied()) {
        return (None, None);
    }
    let x = lu.solve(bb).map(|lambda| sub.transpose() * lambda);
    let y = lu.solve(&(-(sub * c))).filter(|yb| {
        let r = sub.transpose() * yb + c;
        r.amax() <= tol
    });
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(c: Vec<f64>, rows: &[Vec<f64>], b: Vec<f64>) -> LinearProgram {
        LinearProgram::from_rows(c, rows, b).unwrap()
    }

    #[test]
    fn single_vertex() {
        match reference_solve(&lp(vec![1.0], &[vec![-1.0]], vec![-1.0])).unwrap() {
            ReferenceOutcome::Optimal { x, y, objective } => {
                assert_eq!(x, vec![1.0]);
                assert_eq!(y, vec![1.0]);
                assert_eq!(objective, 1.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let out = reference_solve(&lp(vec![1.0], &[vec![1.0], vec![-1.0]], vec![-1.0, -2.0])).unwrap();
        assert_eq!(out, ReferenceOutcome::Infeasible);
    }

    #[test]
    fn unbounded_cases() {
        let free = LinearProgram::new(vec![-1.0], DMatrix::zeros(0, 1), vec![]).unwrap();
        assert_eq!(reference_solve(&free).unwrap(), ReferenceOutcome::Unbounded);
        // max x s.t. x >= 0
        let ray = lp(vec![-1.0], &[vec![-1.0]], vec![0.0]);
        assert_eq!(reference_solve(&ray).unwrap(), ReferenceOutcome::Unbounded);
    }

    #[test]
    fn zero_cost_without_constraints_is_optimal_at_origin() {
        let free = LinearProgram::new(vec![0.0, 0.0], DMatrix::zeros(0, 2), vec![]).unwrap();
        assert_eq!(
            reference_solve(&free).unwrap(),
            ReferenceOutcome::Optimal {
                x: vec![0.0, 0.0],
                y: vec![],
                objective: 0.0
            }
        );
    }

    #[test]
    fn rank_deficient_program_with_lineality() {
        // min x1 + x2 s.t. x1 + x2 >= 1: optimum 1 along a line
        let out = reference_solve(&lp(vec![1.0, 1.0], &[vec![-1.0, -1.0]], vec![-1.0])).unwrap();
        match out {
            ReferenceOutcome::Optimal { x, y, objective } => {
                assert!((objective - 1.0).abs() < 1e-12);
                assert!((x[0] - 0.5).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);
                assert!((y[0] - 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        // c has a component along the line: unbounded
        let out = reference_solve(&lp(vec![1.0, 0.0], &[vec![-1.0, -1.0]], vec![-1.0])).unwrap();
        assert_eq!(out, ReferenceOutcome::Unbounded);
    }

    #[test]
    fn box_program() {
        // min −x1 − 2x2 over the unit box
        let rows = [vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]];
        match reference_solve(&lp(vec![-1.0, -2.0], &rows, vec![1.0, 1.0, 0.0, 0.0])).unwrap() {
            ReferenceOutcome::Optimal { x, y, objective } => {
                assert_eq!(x, vec![1.0, 1.0]);
                assert_eq!(objective, -3.0);
                assert_eq!(y, vec![1.0, 2.0, 0.0, 0.0]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scale_cap() {
        let n = 15;
        let m = 40;
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|j| {
                (0..n)
                    .map(|i| ((i * 7 + j * 13) % 11) as f64 - 5.0 + if i == j % n { 20.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        let err = reference_solve(&lp(vec![1.0; n], &rows, vec![1.0; m])).unwrap_err();
        assert!(matches!(err, SaddleError::UnsupportedScale { .. }));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(25, 16), 2_042_975);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(0, 0), 1);
        assert_eq!(binomial(4, 4), 1);
    }
}
