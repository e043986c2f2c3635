//! Lyapunov values, observable certificates and their monitors.
//!
//! A certificate is a nonnegative 2-vector `h` bracketed by the saddle gaps
//! `(S(x⋆,y⋆) − S(x⋆,y), S(x,y⋆) − S(x⋆,y⋆))`. Component order follows that
//! bracket: the `y`-side gap comes first.

use crate::error::{check_len, Result, SaddleError};
use crate::flows::{distance, proximal_inner_argmin, AugmentedState, RegularizationConfig, StateLayout, VectorField};
use crate::integrate::{AuxSample, Trajectory};
use crate::problem::{ConvexityClass, PointPair, SaddleProblem};

/// Numerical slack on both sides of the sandwich bound.
pub const SANDWICH_SLACK: f64 = 1e-9;
/// Allowed negative excursion of a certificate component.
pub const CERTIFICATE_NEG_SLACK: f64 = 1e-12;
/// Allowed growth of V between consecutive recorded samples.
pub const V_DESCENT_SLACK: f64 = 1e-8;
/// Allowed positive value of the analytic derivative of V.
pub const V_DOT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReferenceSource {
    OracleSolver,
    UserSupplied,
    FlowLimit,
}

/// The saddle point `(x⋆, y⋆)` that `V` measures distance to.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovReference {
    pub point: PointPair,
    pub source: ReferenceSource,
}

impl LyapunovReference {
    pub fn user(point: PointPair) -> Self {
        Self {
            point,
            source: ReferenceSource::UserSupplied,
        }
    }

    pub fn flow_limit(point: PointPair) -> Self {
        Self {
            point,
            source: ReferenceSource::FlowLimit,
        }
    }

    /// A reference produced by an external solver. `field` must be
    /// stationary (residual at most `1e-6`) at the point lifted into its
    /// layout, which for projected flows is the constrained saddle condition.
    pub fn from_oracle(field: &VectorField, point: PointPair) -> Result<Self> {
        let (n, m) = field.layout().dims();
        check_len("reference x", n, point.x.len())?;
        check_len("reference y", m, point.y.len())?;
        let r = field.residual(&field.layout().lift(&point))?;
        if r > 1e-6 {
            return Err(SaddleError::InvalidConfig(format!(
                "oracle reference is not stationary (residual {r:e})"
            )));
        }
        Ok(Self {
            point,
            source: ReferenceSource::OracleSolver,
        })
    }
}

/// `V = ½‖x − x⋆‖² + ½‖y − y⋆‖²`.
pub fn lyapunov_value(reference: &LyapunovReference, p: &PointPair) -> Result<f64> {
    check_len("x", reference.point.x.len(), p.x.len())?;
    check_len("y", reference.point.y.len(), p.y.len())?;
    let dx = distance(&p.x, &reference.point.x);
    let dy = distance(&p.y, &reference.point.y);
    Ok(0.5 * dx * dx + 0.5 * dy * dy)
}

/// `V̇ = (s − s⋆)ᵀ f(s)` for the field's own state vector.
pub fn lyapunov_derivative(field: &VectorField, reference_state: &[f64], state: &[f64]) -> Result<f64> {
    check_len("reference state", field.dim(), reference_state.len())?;
    let rate = field.eval(state)?;
    Ok(state
        .iter()
        .zip(reference_state)
        .zip(&rate)
        .map(|((s, r), f)| (s - r) * f)
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateValue {
    pub h1: f64,
    pub h2: f64,
}

impl CertificateValue {
    pub const ZERO: Self = Self { h1: 0.0, h2: 0.0 };

    pub fn new(h1: f64, h2: f64) -> Self {
        Self { h1, h2 }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.h1 >= -CERTIFICATE_NEG_SLACK && self.h2 >= -CERTIFICATE_NEG_SLACK
    }

    pub fn max(&self) -> f64 {
        self.h1.max(self.h2)
    }
}

/// The bracketing vector `(S(x⋆,y⋆) − S(x⋆,y), S(x,y⋆) − S(x⋆,y⋆))`.
pub fn saddle_gap(prob: &dyn SaddleProblem, reference: &LyapunovReference, p: &PointPair) -> Result<CertificateValue> {
    p.check_dims(prob)?;
    reference.point.check_dims(prob)?;
    let (xs, ys) = (&reference.point.x, &reference.point.y);
    let center = prob.value(xs, ys)?;
    Ok(CertificateValue {
        h1: center - prob.value(xs, &p.y)?,
        h2: prob.value(&p.x, ys)? - center,
    })
}

/// Certificate for strictly convex-concave problems: the saddle gap itself.
pub fn certificate_strict(
    prob: &dyn SaddleProblem,
    reference: &LyapunovReference,
    p: &PointPair,
) -> Result<CertificateValue> {
    if prob.convexity() != ConvexityClass::StrictlyConvexConcave {
        return Err(SaddleError::Unsupported(format!(
            "strict certificate needs a strictly convex-concave problem, got {}",
            prob.convexity()
        )));
    }
    saddle_gap(prob, reference, p)
}

/// `h = (‖y − w‖²/(2ρ), ‖x − z‖²/(2ρ))`.
pub fn certificate_separable(cfg: RegularizationConfig, st: &AugmentedState) -> CertificateValue {
    let rho = cfg.rho();
    let (dx, dy) = (st.x_gap(), st.y_gap());
    CertificateValue {
        h1: dy * dy / (2.0 * rho),
        h2: dx * dx / (2.0 * rho),
    }
}

/// `h = (S̄(z⋆,y⋆) − S̄(z⋆,y), ½‖x̄(z,y⋆) − z‖²)` for the proximal surrogate
/// `S̄`, with `reference` a saddle of `S̄` in `(z, y)` coordinates.
pub fn certificate_proximal(
    prob: &dyn SaddleProblem,
    reference: &LyapunovReference,
    z: &[f64],
    y: &[f64],
    tol: f64,
) -> Result<CertificateValue> {
    check_len("z", prob.dim_x(), z.len())?;
    check_len("y", prob.dim_y(), y.len())?;
    reference.point.check_dims(prob)?;
    let (zs, ys) = (&reference.point.x, &reference.point.y);
    let surrogate = |z: &[f64], y: &[f64]| -> Result<f64> {
        let xb = proximal_inner_argmin(prob, z, y, tol)?;
        let d = distance(&xb, z);
        Ok(prob.value(&xb, y)? + 0.5 * d * d)
    };
    let h1 = surrogate(zs, ys)? - surrogate(zs, y)?;
    let xb = proximal_inner_argmin(prob, z, ys, tol)?;
    let d = distance(&xb, z);
    Ok(CertificateValue { h1, h2: 0.5 * d * d })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub upper: CertificateValue,
    pub h: CertificateValue,
    /// Largest amount by which `0 ≤ h ≤ upper` fails; nonpositive when it holds.
    pub violation: f64,
    pub passed: bool,
}

/// Checks `upper ≥ h ≥ 0` componentwise with slack [`SANDWICH_SLACK`], where
/// `upper` is the saddle gap of `prob` at `p`.
pub fn sandwich_check(
    prob: &dyn SaddleProblem,
    reference: &LyapunovReference,
    p: &PointPair,
    h: CertificateValue,
) -> Result<SandwichReport> {
    let upper = saddle_gap(prob, reference, p)?;
    let violation = [-h.h1, -h.h2, h.h1 - upper.h1, h.h2 - upper.h2]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SandwichReport {
        upper,
        h,
        violation,
        passed: violation <= SANDWICH_SLACK,
    })
}

/// Which certificate the monitor evaluates along a trajectory.
#[derive(Clone, Copy)]
pub enum CertificateKind<'a> {
    /// Only `V` and the residual are tracked; `h` is reported as zero.
    None,
    /// The raw saddle gap of `prob`, valid for any problem with a value oracle.
    SaddleGap(&'a dyn SaddleProblem),
    Strict(&'a dyn SaddleProblem),
    Separable(RegularizationConfig),
    Proximal {
        prob: &'a dyn SaddleProblem,
        tol: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    pub samples: usize,
    pub initial_lyapunov: f64,
    pub final_lyapunov: f64,
    /// Largest `V(t_{k+1}) − V(t_k)` over consecutive samples.
    pub max_lyapunov_increase: f64,
    pub terminal_h: CertificateValue,
    pub terminal_residual: f64,
    pub min_h: f64,
}

impl MonitorReport {
    pub fn lyapunov_descends(&self) -> bool {
        self.max_lyapunov_increase <= V_DESCENT_SLACK
    }
}

/// Evaluates `V`, `h` and the residual at every sample of `traj`, stores them
/// in `traj.aux`, and summarizes descent of `V` and the terminal values.
///
/// `reference` is in original coordinates; it is lifted into the trajectory's
/// layout (aligned virtual copies for augmented states).
pub fn trajectory_monitor(
    reference: &LyapunovReference,
    certificate: CertificateKind<'_>,
    traj: &mut Trajectory,
) -> Result<MonitorReport> {
    let layout = traj.layout;
    let (n, m) = layout.dims();
    check_len("reference x", n, reference.point.x.len())?;
    check_len("reference y", m, reference.point.y.len())?;
    let ref_state = layout.lift(&reference.point);

    let mut aux = Vec::with_capacity(traj.len());
    for (state, &residual) in traj.states.iter().zip(&traj.residuals) {
        let dv = distance(state, &ref_state);
        let lyapunov = 0.5 * dv * dv;
        let h = match certificate {
            CertificateKind::None => CertificateValue::ZERO,
            CertificateKind::SaddleGap(prob) => saddle_gap(prob, reference, &layout.primary_pair(state))?,
            CertificateKind::Strict(prob) => certificate_strict(prob, reference, &layout.primary_pair(state))?,
            CertificateKind::Separable(cfg) => match layout {
                StateLayout::Augmented { n, m } => {
                    certificate_separable(cfg, &AugmentedState::from_slice(n, m, state)?)
                }
                _ => {
                    return Err(SaddleError::Unsupported(
                        "separable certificate needs an augmented trajectory".into(),
                    ))
                }
            },
            CertificateKind::Proximal { prob, tol } => match layout {
                StateLayout::Proximal { n, .. } => {
                    let (z, y) = state.split_at(n);
                    certificate_proximal(prob, reference, z, y, tol)?
                }
                _ => {
                    return Err(SaddleError::Unsupported(
                        "proximal certificate needs a proximal trajectory".into(),
                    ))
                }
            },
        };
        aux.push(AuxSample {
            lyapunov,
            h1: h.h1,
            h2: h.h2,
            residual,
        });
    }

    let first = aux
        .first()
        .ok_or_else(|| SaddleError::InvalidConfig("empty trajectory".into()))?;
    let last = aux.last().expect("nonempty");
    let max_increase = aux
        .windows(2)
        .map(|w| w[1].lyapunov - w[0].lyapunov)
        .fold(f64::NEG_INFINITY, f64::max);
    let report = MonitorReport {
        samples: aux.len(),
        initial_lyapunov: first.lyapunov,
        final_lyapunov: last.lyapunov,
        max_lyapunov_increase: if aux.len() < 2 { 0.0 } else { max_increase },
        terminal_h: CertificateValue::new(last.h1, last.h2),
        terminal_residual: last.residual,
        min_h: aux.iter().map(|a| a.h1.min(a.h2)).fold(f64::INFINITY, f64::min),
    };
    traj.aux = Some(aux);
    Ok(report)
}
