//! Saddle flow dynamics for convex-concave problems.
//!
//! The crate builds the gradient descent-ascent vector field of a saddle
//! function and its variants (separable regularization with virtual copies,
//! projection onto the nonnegative orthant, proximal smoothing), integrates
//! them with fixed-step schemes, and monitors convergence through Lyapunov
//! values and observable certificates. On top sit an LP solver driven by the
//! projected-regularized flow, its per-agent distributed form, and a
//! finite-horizon control example.
//!
//! ```
//! use std::sync::Arc;
//! use saddleflow::prelude::*;
//!
//! let prob: SharedProblem = Arc::new(QuadraticSaddle::scalar_bilinear());
//! let field = regularized_field(prob, RegularizationConfig::new(1.0).unwrap());
//! let cfg = IntegratorConfig { t_max: 200.0, ..Default::default() };
//! let (traj, stop) = integrate(&field, &[1.0, 0.0, 0.0, 0.0], &cfg).unwrap();
//! assert_eq!(stop.kind, StopKind::Converged);
//! let last = AugmentedState::from_slice(1, 1, traj.final_state().unwrap()).unwrap();
//! let saddle = extract_original_saddle(&last, 1e-6).unwrap();
//! assert!(saddle.x[0].abs() < 1e-6 && saddle.y[0].abs() < 1e-6);
//! ```

// index loops over parallel slices read closer to the math; `!(x > 0.0)` also rejects NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod control;
pub mod error;
pub mod flows;
pub mod integrate;
pub mod lp;
pub mod problem;

pub use error::{Result, SaddleError};

pub mod prelude {
    pub use crate::certificates::{
        certificate_proximal, certificate_separable, certificate_strict, lyapunov_derivative, lyapunov_value,
        saddle_gap, sandwich_check, trajectory_monitor, CertificateKind, CertificateValue, LyapunovReference,
        MonitorReport, ReferenceSource,
    };
    pub use crate::control::{build_lp, reproduce_paper_case, simulate, ControlProblem, ControlSolution};
    pub use crate::error::{Result, SaddleError};
    pub use crate::flows::{
        augment, extract_original_saddle, plain_field, project_component, projected_field, projected_regularized_field,
        proximal_field, proximal_inner_argmin, regularized_field, AugmentedState, FieldKind, RegularizationConfig,
        StateLayout, VectorField,
    };
    pub use crate::integrate::{integrate, step, IntegratorConfig, Scheme, StopKind, StopReason, Trajectory};
    pub use crate::lp::{lagrangian, reference_solve, solve, solve_distributed, LinearProgram, ReferenceOutcome};
    pub use crate::problem::{
        builtin, check_saddle_inequality, eval_gradients, stationarity_residual, ConvexityClass, PointPair,
        QuadraticSaddle, SaddleProblem, SharedProblem,
    };
}
