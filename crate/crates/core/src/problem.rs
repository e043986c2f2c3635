//! Convex-concave saddle problems presented through value and gradient oracles.
//!
//! A problem is anything implementing [`SaddleProblem`]. The library ships a
//! dense quadratic family ([`QuadraticSaddle`]) that covers bilinear forms,
//! strictly convex-concave quadratics and LP Lagrangians, plus a closure-backed
//! [`FnProblem`] for user oracles.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{check_len, Result, SaddleError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConvexityClass {
    ConvexConcave,
    StrictlyConvexConcave,
    Bilinear,
}

impl fmt::Display for ConvexityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConvexityClass::ConvexConcave => "convex-concave",
            ConvexityClass::StrictlyConvexConcave => "strictly-convex-concave",
            ConvexityClass::Bilinear => "bilinear",
        })
    }
}

/// A convex-concave function `S(x, y)` with `x` of length [`dim_x`](Self::dim_x)
/// and `y` of length [`dim_y`](Self::dim_y).
///
/// Oracles must be pure: the same inputs always yield the same outputs and no
/// hidden state is mutated. Callers guarantee slice lengths match the declared
/// dimensions; the checked entry points in this module validate them.
pub trait SaddleProblem: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn convexity(&self) -> ConvexityClass;

    /// `S(x, y)`. Problems without a value oracle keep the default.
    fn value(&self, _x: &[f64], _y: &[f64]) -> Result<f64> {
        Err(SaddleError::Unsupported("problem has no value oracle".into()))
    }

    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()>;
    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()>;

    /// Closed-form `argmin_x S(x, y) + ½‖x − z‖²`, when the problem knows one.
    fn prox_x(&self, _z: &[f64], _y: &[f64], _out: &mut [f64]) -> Option<Result<()>> {
        None
    }
}

pub type SharedProblem = Arc<dyn SaddleProblem>;

#[derive(Debug, Clone, PartialEq)]
pub struct PointPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PointPair {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            x: vec![0.0; n],
            y: vec![0.0; m],
        }
    }

    pub fn check_dims(&self, prob: &dyn SaddleProblem) -> Result<()> {
        check_len("x", prob.dim_x(), self.x.len())?;
        check_len("y", prob.dim_y(), self.y.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleEstimate {
    pub point: PointPair,
    pub stationarity_residual: f64,
    pub converged: bool,
}

impl SaddleEstimate {
    /// Evaluates the residual at `point` and marks the estimate converged when
    /// it is within `tol`.
    pub fn assess(prob: &dyn SaddleProblem, point: PointPair, tol: f64) -> Result<Self> {
        let residual = stationarity_residual(prob, &point)?;
        Ok(Self {
            point,
            stationarity_residual: residual,
            converged: residual <= tol,
        })
    }
}

pub fn eval_gradients(prob: &dyn SaddleProblem, p: &PointPair) -> Result<(Vec<f64>, Vec<f64>)> {
    p.check_dims(prob)?;
    let mut gx = vec![0.0; prob.dim_x()];
    let mut gy = vec![0.0; prob.dim_y()];
    prob.grad_x(&p.x, &p.y, &mut gx)?;
    prob.grad_y(&p.x, &p.y, &mut gy)?;
    Ok((gx, gy))
}

/// Euclidean norm of the stacked gradient `(∇ₓS, ∇ᵧS)`.
pub fn stationarity_residual(prob: &dyn SaddleProblem, p: &PointPair) -> Result<f64> {
    let (gx, gy) = eval_gradients(prob, p)?;
    Ok(gx.iter().chain(&gy).map(|g| g * g).sum::<f64>().sqrt())
}

/// Slack allowed on each side of the sampled saddle inequality.
pub const SADDLE_INEQUALITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleInequalityReport {
    pub samples: usize,
    /// Largest of `S(x⋆,y) − S(x⋆,y⋆)` and `S(x⋆,y⋆) − S(x,y⋆)` over all samples.
    pub worst_violation: f64,
    pub worst_sample: Option<PointPair>,
    /// Stationarity residual of the candidate itself.
    pub candidate_residual: f64,
    pub passed: bool,
}

/// Checks `S(x⋆,y) ≤ S(x⋆,y⋆) ≤ S(x,y⋆)` over `k` points drawn from `sampler`.
///
/// This is a statistical check. A candidate that is not stationary is still
/// examined; its residual is reported alongside the worst violation.
pub fn check_saddle_inequality<F>(
    prob: &dyn SaddleProblem,
    candidate: &PointPair,
    mut sampler: F,
    k: usize,
) -> Result<SaddleInequalityReport>
where
    F: FnMut() -> PointPair,
{
    candidate.check_dims(prob)?;
    let center = prob.value(&candidate.x, &candidate.y)?;
    let candidate_residual = stationarity_residual(prob, candidate)?;

    let mut worst = f64::NEG_INFINITY;
    let mut worst_sample = None;
    for _ in 0..k {
        let s = sampler();
        s.check_dims(prob)?;
        let upper = prob.value(&candidate.x, &s.y)? - center;
        let lower = center - prob.value(&s.x, &candidate.y)?;
        let v = upper.max(lower);
        if v > worst {
            worst = v;
            worst_sample = Some(s);
        }
    }
    let worst_violation = if k == 0 { 0.0 } else { worst };
    Ok(SaddleInequalityReport {
        samples: k,
        worst_violation,
        worst_sample,
        candidate_residual,
        passed: worst_violation <= SADDLE_INEQUALITY_SLACK,
    })
}

/// `S(x,y) = ½xᵀPx + xᵀCy − ½yᵀQy + aᵀx + bᵀy` with `P, Q` positive semidefinite.
///
/// `P` and `Q` are optional; when both are absent the problem is bilinear. The
/// LP Lagrangian `cᵀx + yᵀ(Ax − b)` is the instance `C = Aᵀ`, `a = c`, `b = −b`.
#[derive(Debug, Clone)]
pub struct QuadraticSaddle {
    p: Option<DMatrix<f64>>,
    q: Option<DMatrix<f64>>,
    coupling: DMatrix<f64>,
    lin_x: Vec<f64>,
    lin_y: Vec<f64>,
    class: ConvexityClass,
    prox: Option<Cholesky<f64, Dyn>>,
}

impl QuadraticSaddle {
    pub fn new(
        p: Option<DMatrix<f64>>,
        coupling: DMatrix<f64>,
        q: Option<DMatrix<f64>>,
        lin_x: Vec<f64>,
        lin_y: Vec<f64>,
    ) -> Result<Self> {
        let (n, m) = coupling.shape();
        if n == 0 || m == 0 {
            return Err(SaddleError::InvalidConfig(
                "saddle problems need n >= 1 and m >= 1".into(),
            ));
        }
        check_len("linear x term", n, lin_x.len())?;
        check_len("linear y term", m, lin_y.len())?;
        let mut strict = false;
        for (name, mat, dim) in [("P", &p, n), ("Q", &q, m)] {
            if let Some(mat) = mat {
                check_len(name, dim, mat.nrows())?;
                check_len(name, dim, mat.ncols())?;
                if (mat - mat.transpose()).amax() > 1e-12 * (1.0 + mat.amax()) {
                    return Err(SaddleError::InvalidConfig(format!("{name} is not symmetric")));
                }
                let eig = SymmetricEigen::new(mat.clone()).eigenvalues;
                let min = eig.min();
                if min < -1e-12 * (1.0 + mat.amax()) {
                    return Err(SaddleError::InvalidConfig(format!(
                        "{name} is not positive semidefinite (eigenvalue {min:e})"
                    )));
                }
                strict |= min > 1e-12;
            }
        }
        if !coupling.iter().chain(&lin_x).chain(&lin_y).all(|v| v.is_finite()) {
            return Err(SaddleError::InvalidConfig("non-finite coefficient".into()));
        }
        let class = if p.is_none() && q.is_none() {
            ConvexityClass::Bilinear
        } else if strict {
            ConvexityClass::StrictlyConvexConcave
        } else {
            ConvexityClass::ConvexConcave
        };
        let prox = match &p {
            Some(p) => {
                let shifted = p + DMatrix::identity(n, n);
                Some(
                    Cholesky::new(shifted)
                        .ok_or_else(|| SaddleError::InvalidConfig("P + I is not positive definite".into()))?,
                )
            }
            None => None,
        };
        Ok(Self {
            p,
            q,
            coupling,
            lin_x,
            lin_y,
            class,
            prox,
        })
    }

    /// `S(x,y) = xᵀCy`.
    pub fn bilinear(coupling: DMatrix<f64>) -> Result<Self> {
        let (n, m) = coupling.shape();
        Self::new(None, coupling, None, vec![0.0; n], vec![0.0; m])
    }

    /// Scalar `S(x,y) = x·y`.
    pub fn scalar_bilinear() -> Self {
        Self::bilinear(DMatrix::from_element(1, 1, 1.0)).expect("valid 1x1 problem")
    }

    /// Scalar `S(x,y) = ½p·x² + c·xy − ½q·y²`.
    pub fn scalar(p: f64, c: f64, q: f64) -> Result<Self> {
        let one = |v: f64| (v != 0.0).then(|| DMatrix::from_element(1, 1, v));
        Self::new(one(p), DMatrix::from_element(1, 1, c), one(q), vec![0.0], vec![0.0])
    }

    pub fn dims(&self) -> (usize, usize) {
        self.coupling.shape()
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn lin_x(&self) -> &[f64] {
        &self.lin_x
    }

    pub fn lin_y(&self) -> &[f64] {
        &self.lin_y
    }
}

impl SaddleProblem for QuadraticSaddle {
    fn dim_x(&self) -> usize {
        self.coupling.nrows()
    }

    fn dim_y(&self) -> usize {
        self.coupling.ncols()
    }

    fn convexity(&self) -> ConvexityClass {
        self.class
    }

    fn value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let (n, m) = self.dims();
        let mut s = 0.0;
        for i in 0..n {
            s += self.lin_x[i] * x[i];
            for j in 0..m {
                s += x[i] * self.coupling[(i, j)] * y[j];
            }
        }
        for j in 0..m {
            s += self.lin_y[j] * y[j];
        }
        if let Some(p) = &self.p {
            s += 0.5 * quad_form(p, x);
        }
        if let Some(q) = &self.q {
            s -= 0.5 * quad_form(q, y);
        }
        Ok(s)
    }

    // The accumulation order here is load-bearing: the distributed LP agents
    // repeat it term by term so their rounds match the centralized flow bit for bit.
    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        let (n, m) = self.dims();
        for i in 0..n {
            let mut g = self.lin_x[i];
            if let Some(p) = &self.p {
                for k in 0..n {
                    g += p[(i, k)] * x[k];
                }
            }
            for j in 0..m {
                g += self.coupling[(i, j)] * y[j];
            }
            out[i] = g;
        }
        Ok(())
    }

    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        let (n, m) = self.dims();
        for j in 0..m {
            let mut g = self.lin_y[j];
            for i in 0..n {
                g += self.coupling[(i, j)] * x[i];
            }
            if let Some(q) = &self.q {
                for k in 0..m {
                    g -= q[(j, k)] * y[k];
                }
            }
            out[j] = g;
        }
        Ok(())
    }

    fn prox_x(&self, z: &[f64], y: &[f64], out: &mut [f64]) -> Option<Result<()>> {
        // (P + I) x = z − a − Cy
        let (n, m) = self.dims();
        let rhs = DVector::from_fn(n, |i, _| {
            let mut g = self.lin_x[i];
            for j in 0..m {
                g += self.coupling[(i, j)] * y[j];
            }
            z[i] - g
        });
        match &self.prox {
            None => out.copy_from_slice(rhs.as_slice()),
            Some(chol) => out.copy_from_slice(chol.solve(&rhs).as_slice()),
        }
        Some(Ok(()))
    }
}

fn quad_form(mat: &DMatrix<f64>, v: &[f64]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        for k in 0..n {
            s += v[i] * mat[(i, k)] * v[k];
        }
    }
    s
}

type ValueFn = dyn Fn(&[f64], &[f64]) -> Result<f64> + Send + Sync;
type GradFn = dyn Fn(&[f64], &[f64], &mut [f64]) -> Result<()> + Send + Sync;

/// A problem assembled from user-supplied oracle closures.
pub struct FnProblem {
    n: usize,
    m: usize,
    class: ConvexityClass,
    value: Option<Box<ValueFn>>,
    grad_x: Box<GradFn>,
    grad_y: Box<GradFn>,
}

impl FnProblem {
    pub fn new<GX, GY>(n: usize, m: usize, class: ConvexityClass, grad_x: GX, grad_y: GY) -> Result<Self>
    where
        GX: Fn(&[f64], &[f64], &mut [f64]) -> Result<()> + Send + Sync + 'static,
        GY: Fn(&[f64], &[f64], &mut [f64]) -> Result<()> + Send + Sync + 'static,
    {
        if n == 0 || m == 0 {
            return Err(SaddleError::InvalidConfig(
                "saddle problems need n >= 1 and m >= 1".into(),
            ));
        }
        Ok(Self {
            n,
            m,
            class,
            value: None,
            grad_x: Box::new(grad_x),
            grad_y: Box::new(grad_y),
        })
    }

    pub fn with_value<V>(mut self, value: V) -> Self
    where
        V: Fn(&[f64], &[f64]) -> Result<f64> + Send + Sync + 'static,
    {
        self.value = Some(Box::new(value));
        self
    }
}

impl fmt::Debug for FnProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnProblem")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("class", &self.class)
            .field("has_value", &self.value.is_some())
            .finish()
    }
}

impl SaddleProblem for FnProblem {
    fn dim_x(&self) -> usize {
        self.n
    }

    fn dim_y(&self) -> usize {
        self.m
    }

    fn convexity(&self) -> ConvexityClass {
        self.class
    }

    fn value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        match &self.value {
            Some(v) => v(x, y),
            None => Err(SaddleError::Unsupported("problem has no value oracle".into())),
        }
    }

    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        (self.grad_x)(x, y, out)
    }

    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        (self.grad_y)(x, y, out)
    }
}

/// A named problem that ships with the library, together with its saddle point.
#[derive(Clone)]
pub struct Builtin {
    pub name: &'static str,
    pub problem: SharedProblem,
    pub saddle: PointPair,
}

pub const BUILTIN_NAMES: [&str; 5] = [
    "bilinear",
    "quadratic",
    "coupled-quadratic",
    "bilinear-offset",
    "lp-small",
];

/// Looks up one of [`BUILTIN_NAMES`].
pub fn builtin(name: &str) -> Option<Builtin> {
    let (name, problem, saddle): (&'static str, QuadraticSaddle, PointPair) = match name {
        "bilinear" => ("bilinear", QuadraticSaddle::scalar_bilinear(), PointPair::zeros(1, 1)),
        "quadratic" => (
            "quadratic",
            QuadraticSaddle::scalar(1.0, 0.0, 1.0).ok()?,
            PointPair::zeros(1, 1),
        ),
        "coupled-quadratic" => (
            "coupled-quadratic",
            QuadraticSaddle::scalar(1.0, 1.0, 1.0).ok()?,
            PointPair::zeros(1, 1),
        ),
        // xᵀCy + aᵀx + bᵀy with C = [[1, 2], [0, 1]], a = (−1, 1), b = (2, −1):
        // the saddle solves Cy = −a and Cᵀx = −b.
        "bilinear-offset" => (
            "bilinear-offset",
            QuadraticSaddle::new(
                None,
                DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]),
                None,
                vec![-1.0, 1.0],
                vec![2.0, -1.0],
            )
            .ok()?,
            PointPair::new(vec![-2.0, 5.0], vec![3.0, -1.0]),
        ),
        // min x s.t. x >= 1
        "lp-small" => (
            "lp-small",
            QuadraticSaddle::new(None, DMatrix::from_element(1, 1, -1.0), None, vec![1.0], vec![1.0]).ok()?,
            PointPair::new(vec![1.0], vec![1.0]),
        ),
        _ => return None,
    };
    Some(Builtin {
        name,
        problem: Arc::new(problem),
        saddle,
    })
}
