//! Vector fields of the saddle flow and its regularized, projected and
//! proximal variants.
//!
//! State vectors are laid out block-wise as described by [`StateLayout`]:
//! `[x, y]` for plain and projected flows, `[x, z, y, w]` for the regularized
//! flows, and `[z, y]` for the proximal flow.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_len, Result, SaddleError};
use crate::problem::{ConvexityClass, PointPair, SaddleProblem, SharedProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    Plain,
    Regularized,
    Projected,
    ProjectedRegularized,
    Proximal,
}

impl FieldKind {
    pub fn is_projected(self) -> bool {
        matches!(self, FieldKind::Projected | FieldKind::ProjectedRegularized)
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FieldKind::Plain => "plain",
            FieldKind::Regularized => "regularized",
            FieldKind::Projected => "projected",
            FieldKind::ProjectedRegularized => "projected-regularized",
            FieldKind::Proximal => "proximal",
        })
    }
}

/// How a flat state vector splits into named blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateLayout {
    /// `[x, y]`
    Plain { n: usize, m: usize },
    /// `[x, z, y, w]`
    Augmented { n: usize, m: usize },
    /// `[z, y]`
    Proximal { n: usize, m: usize },
}

impl StateLayout {
    pub fn dim(&self) -> usize {
        match *self {
            StateLayout::Plain { n, m } | StateLayout::Proximal { n, m } => n + m,
            StateLayout::Augmented { n, m } => 2 * (n + m),
        }
    }

    /// Original dimensions `(n, m)`.
    pub fn dims(&self) -> (usize, usize) {
        match *self {
            StateLayout::Plain { n, m } | StateLayout::Augmented { n, m } | StateLayout::Proximal { n, m } => (n, m),
        }
    }

    pub fn blocks(&self) -> Vec<(&'static str, usize)> {
        match *self {
            StateLayout::Plain { n, m } => vec![("x", n), ("y", m)],
            StateLayout::Augmented { n, m } => vec![("x", n), ("z", n), ("y", m), ("w", m)],
            StateLayout::Proximal { n, m } => vec![("z", n), ("y", m)],
        }
    }

    /// Column names such as `x1, x2, z1, ...`.
    pub fn column_names(&self) -> Vec<String> {
        self.blocks()
            .into_iter()
            .flat_map(|(name, len)| (1..=len).map(move |i| format!("{name}{i}")))
            .collect()
    }

    /// The pair the flow is solving for: `(x, y)` or, for the proximal layout, `(z, y)`.
    pub fn primary_pair(&self, state: &[f64]) -> PointPair {
        let (n, m) = self.dims();
        match self {
            StateLayout::Plain { .. } | StateLayout::Proximal { .. } => {
                PointPair::new(state[..n].to_vec(), state[n..n + m].to_vec())
            }
            StateLayout::Augmented { .. } => PointPair::new(state[..n].to_vec(), state[2 * n..2 * n + m].to_vec()),
        }
    }

    /// Lifts an original-coordinate point into this layout, copying `x` into `z`
    /// and `y` into `w` for augmented states.
    pub fn lift(&self, p: &PointPair) -> Vec<f64> {
        match self {
            StateLayout::Plain { .. } | StateLayout::Proximal { .. } => p.x.iter().chain(&p.y).copied().collect(),
            StateLayout::Augmented { .. } => p.x.iter().chain(&p.x).chain(&p.y).chain(&p.y).copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationConfig {
    rho: f64,
}

impl RegularizationConfig {
    pub fn new(rho: f64) -> Result<Self> {
        if rho > 0.0 && rho.is_finite() {
            Ok(Self { rho })
        } else {
            Err(SaddleError::InvalidConfig(format!(
                "rho must be positive and finite, got {rho}"
            )))
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Original variables `(x, y)` and their virtual copies `(z, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
}

impl AugmentedState {
    pub fn new(x: Vec<f64>, z: Vec<f64>, y: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        check_len("z", x.len(), z.len())?;
        check_len("w", y.len(), w.len())?;
        Ok(Self { x, z, y, w })
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            x: vec![0.0; n],
            z: vec![0.0; n],
            y: vec![0.0; m],
            w: vec![0.0; m],
        }
    }

    /// Both virtual copies equal their originals.
    pub fn aligned(p: &PointPair) -> Self {
        Self {
            x: p.x.clone(),
            z: p.x.clone(),
            y: p.y.clone(),
            w: p.y.clone(),
        }
    }

    pub fn from_slice(n: usize, m: usize, state: &[f64]) -> Result<Self> {
        check_len("augmented state", 2 * (n + m), state.len())?;
        Ok(Self {
            x: state[..n].to_vec(),
            z: state[n..2 * n].to_vec(),
            y: state[2 * n..2 * n + m].to_vec(),
            w: state[2 * n + m..].to_vec(),
        })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.x
            .iter()
            .chain(&self.z)
            .chain(&self.y)
            .chain(&self.w)
            .copied()
            .collect()
    }

    /// The point `((x, z), (y, w))` of the augmented problem.
    pub fn as_point_pair(&self) -> PointPair {
        PointPair::new(
            self.x.iter().chain(&self.z).copied().collect(),
            self.y.iter().chain(&self.w).copied().collect(),
        )
    }

    pub fn x_gap(&self) -> f64 {
        distance(&self.x, &self.z)
    }

    pub fn y_gap(&self) -> f64 {
        distance(&self.y, &self.w)
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

type FieldFn = dyn Fn(&[f64], &mut [f64]) -> Result<()> + Send + Sync;

/// An autonomous vector field `ṡ = f(s)`.
#[derive(Clone)]
pub struct VectorField {
    kind: FieldKind,
    layout: StateLayout,
    nonneg_mask: Vec<bool>,
    eval: Arc<FieldFn>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("kind", &self.kind)
            .field("layout", &self.layout)
            .field("nonneg_mask", &self.nonneg_mask)
            .finish_non_exhaustive()
    }
}

impl VectorField {
    /// Wraps an arbitrary closure. `nonneg_mask` is either empty or has one
    /// entry per state coordinate.
    pub fn from_fn<F>(kind: FieldKind, layout: StateLayout, nonneg_mask: Vec<bool>, f: F) -> Result<Self>
    where
        F: Fn(&[f64], &mut [f64]) -> Result<()> + Send + Sync + 'static,
    {
        if !nonneg_mask.is_empty() {
            check_len("nonnegativity mask", layout.dim(), nonneg_mask.len())?;
        }
        Ok(Self {
            kind,
            layout,
            nonneg_mask,
            eval: Arc::new(f),
        })
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn layout(&self) -> StateLayout {
        self.layout
    }

    pub fn nonneg_mask(&self) -> &[bool] {
        &self.nonneg_mask
    }

    /// Evaluates the field without checking slice lengths.
    #[inline]
    pub(crate) fn eval_unchecked(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        (self.eval)(state, out)
    }

    pub fn eval_into(&self, state: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("state", self.dim(), state.len())?;
        check_len("output", self.dim(), out.len())?;
        (self.eval)(state, out)
    }

    pub fn eval(&self, state: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(state, &mut out)?;
        Ok(out)
    }

    pub fn residual(&self, state: &[f64]) -> Result<f64> {
        Ok(norm(&self.eval(state)?))
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

// Scalar update rules shared by the centralized fields and the per-agent
// distributed updates. Keeping them in one place makes the two bit-identical.

#[inline]
pub(crate) fn primal_rate(grad: f64, x: f64, z: f64, rho: f64) -> f64 {
    -grad - (x - z) / rho
}

#[inline]
pub(crate) fn dual_rate(grad: f64, y: f64, w: f64, rho: f64) -> f64 {
    grad - (y - w) / rho
}

#[inline]
pub(crate) fn virtual_rate(original: f64, copy: f64, rho: f64) -> f64 {
    (original - copy) / rho
}

/// Element-wise projection of a dual rate onto the tangent cone of the
/// nonnegative orthant: `ν` when `y > 0`, `max(ν, 0)` otherwise.
#[inline]
pub fn project_component(nu: f64, y: f64) -> f64 {
    if y > 0.0 {
        nu
    } else {
        nu.max(0.0)
    }
}

/// Applies [`project_component`] to every coordinate.
pub fn project(nu: &[f64], y: &[f64]) -> Vec<f64> {
    nu.iter().zip(y).map(|(&n, &y)| project_component(n, y)).collect()
}

/// `ẋ = −∇ₓS, ẏ = +∇ᵧS`.
pub fn plain_field(prob: SharedProblem) -> VectorField {
    let (n, m) = (prob.dim_x(), prob.dim_y());
    let eval = move |s: &[f64], out: &mut [f64]| {
        let (x, y) = s.split_at(n);
        let (ox, oy) = out.split_at_mut(n);
        prob.grad_x(x, y, ox)?;
        prob.grad_y(x, y, oy)?;
        ox.iter_mut().for_each(|v| *v = -*v);
        Ok(())
    };
    VectorField::from_fn(FieldKind::Plain, StateLayout::Plain { n, m }, Vec::new(), eval)
        .expect("layout and mask agree")
}

/// `ẋ = −∇ₓS, ẏ = [+∇ᵧS]⁺_y` with every `y` coordinate kept nonnegative.
pub fn projected_field(prob: SharedProblem) -> VectorField {
    let (n, m) = (prob.dim_x(), prob.dim_y());
    let eval = move |s: &[f64], out: &mut [f64]| {
        let (x, y) = s.split_at(n);
        let (ox, oy) = out.split_at_mut(n);
        prob.grad_x(x, y, ox)?;
        prob.grad_y(x, y, oy)?;
        ox.iter_mut().for_each(|v| *v = -*v);
        for (o, &yj) in oy.iter_mut().zip(y) {
            *o = project_component(*o, yj);
        }
        Ok(())
    };
    let mask = (0..n + m).map(|k| k >= n).collect();
    VectorField::from_fn(FieldKind::Projected, StateLayout::Plain { n, m }, mask, eval).expect("layout and mask agree")
}

fn regularized(prob: SharedProblem, cfg: RegularizationConfig, projected: bool) -> VectorField {
    let (n, m) = (prob.dim_x(), prob.dim_y());
    let rho = cfg.rho();
    let eval = move |s: &[f64], out: &mut [f64]| {
        let (x, rest) = s.split_at(n);
        let (z, rest) = rest.split_at(n);
        let (y, w) = rest.split_at(m);
        let (ox, rest) = out.split_at_mut(n);
        let (oz, rest) = rest.split_at_mut(n);
        let (oy, ow) = rest.split_at_mut(m);
        prob.grad_x(x, y, ox)?;
        prob.grad_y(x, y, oy)?;
        for i in 0..n {
            ox[i] = primal_rate(ox[i], x[i], z[i], rho);
            oz[i] = virtual_rate(x[i], z[i], rho);
        }
        for j in 0..m {
            let nu = dual_rate(oy[j], y[j], w[j], rho);
            oy[j] = if projected { project_component(nu, y[j]) } else { nu };
            ow[j] = virtual_rate(y[j], w[j], rho);
        }
        Ok(())
    };
    let layout = StateLayout::Augmented { n, m };
    let (kind, mask) = if projected {
        // only y is projected; w follows y unconstrained
        let mask = (0..2 * (n + m)).map(|k| (2 * n..2 * n + m).contains(&k)).collect();
        (FieldKind::ProjectedRegularized, mask)
    } else {
        (FieldKind::Regularized, Vec::new())
    };
    VectorField::from_fn(kind, layout, mask, eval).expect("layout and mask agree")
}

/// The separable-regularized flow over `[x, z, y, w]`:
/// `ẋ = −∇ₓS − (x−z)/ρ, ż = (x−z)/ρ, ẏ = ∇ᵧS − (y−w)/ρ, ẇ = (y−w)/ρ`.
pub fn regularized_field(prob: SharedProblem, cfg: RegularizationConfig) -> VectorField {
    regularized(prob, cfg, false)
}

/// The regularized flow with the `y` equation projected onto the orthant.
/// The `w` equation is left unprojected.
pub fn projected_regularized_field(prob: SharedProblem, cfg: RegularizationConfig) -> VectorField {
    regularized(prob, cfg, true)
}

/// `S(x,z,y,w) = ‖x−z‖²/(2ρ) + S(x,y) − ‖y−w‖²/(2ρ)` over `x̃ = (x, z)`, `ỹ = (y, w)`.
pub struct Augmented {
    inner: SharedProblem,
    rho: f64,
}

impl fmt::Debug for Augmented {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Augmented")
            .field("n", &self.inner.dim_x())
            .field("m", &self.inner.dim_y())
            .field("rho", &self.rho)
            .finish()
    }
}

impl Augmented {
    pub fn inner(&self) -> &SharedProblem {
        &self.inner
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

pub fn augment(prob: SharedProblem, cfg: RegularizationConfig) -> Augmented {
    Augmented {
        inner: prob,
        rho: cfg.rho(),
    }
}

impl SaddleProblem for Augmented {
    fn dim_x(&self) -> usize {
        2 * self.inner.dim_x()
    }

    fn dim_y(&self) -> usize {
        2 * self.inner.dim_y()
    }

    fn convexity(&self) -> ConvexityClass {
        ConvexityClass::ConvexConcave
    }

    fn value(&self, xz: &[f64], yw: &[f64]) -> Result<f64> {
        let n = self.inner.dim_x();
        let m = self.inner.dim_y();
        let (x, z) = xz.split_at(n);
        let (y, w) = yw.split_at(m);
        let dx = distance(x, z);
        let dy = distance(y, w);
        Ok(dx * dx / (2.0 * self.rho) + self.inner.value(x, y)? - dy * dy / (2.0 * self.rho))
    }

    fn grad_x(&self, xz: &[f64], yw: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.inner.dim_x();
        let (x, z) = xz.split_at(n);
        let y = &yw[..self.inner.dim_y()];
        let (ox, oz) = out.split_at_mut(n);
        self.inner.grad_x(x, y, ox)?;
        for i in 0..n {
            let d = (x[i] - z[i]) / self.rho;
            ox[i] += d;
            oz[i] = -d;
        }
        Ok(())
    }

    fn grad_y(&self, xz: &[f64], yw: &[f64], out: &mut [f64]) -> Result<()> {
        let m = self.inner.dim_y();
        let x = &xz[..self.inner.dim_x()];
        let (y, w) = yw.split_at(m);
        let (oy, ow) = out.split_at_mut(m);
        self.inner.grad_y(x, y, oy)?;
        for j in 0..m {
            let d = (y[j] - w[j]) / self.rho;
            oy[j] -= d;
            ow[j] = d;
        }
        Ok(())
    }
}

/// Default tolerance for the inner proximal minimization.
pub const PROX_DEFAULT_TOL: f64 = 1e-10;
/// Iteration cap for the inner gradient descent.
pub const PROX_MAX_ITERS: usize = 100_000;

/// `x̄ = argmin_x S(x, y) + ½‖x − z‖²`, returned once
/// `‖∇ₓS(x̄, y) + (x̄ − z)‖ ≤ tol`.
///
/// Problems with a closed-form prox use it directly; otherwise (or when the
/// closed form misses `tol` through round-off) gradient descent with
/// backtracking runs from the best available start.
pub fn proximal_inner_argmin(prob: &dyn SaddleProblem, z: &[f64], y: &[f64], tol: f64) -> Result<Vec<f64>> {
    check_len("z", prob.dim_x(), z.len())?;
    check_len("y", prob.dim_y(), y.len())?;
    if !(tol > 0.0) {
        return Err(SaddleError::InvalidConfig(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let n = z.len();
    let mut x = z.to_vec();
    if let Some(res) = prob.prox_x(z, y, &mut x) {
        res?;
    }
    let mut g = vec![0.0; n];
    let inner_grad = |x: &[f64], g: &mut [f64]| -> Result<f64> {
        prob.grad_x(x, y, g)?;
        for i in 0..n {
            g[i] += x[i] - z[i];
        }
        Ok(norm(g))
    };
    let mut gnorm = inner_grad(&x, &mut g)?;
    if gnorm <= tol {
        return Ok(x);
    }

    let objective = |x: &[f64]| -> Result<f64> {
        let d = distance(x, z);
        Ok(prob.value(x, y)? + 0.5 * d * d)
    };
    let mut f = objective(&x)?;
    let mut best = (gnorm, x.clone());
    let mut step = 1.0f64;
    let mut trial = vec![0.0; n];
    let mut trial_g = vec![0.0; n];
    for _ in 0..PROX_MAX_ITERS {
        let mut accepted = false;
        step = (step * 2.0).min(1.0);
        while step > 1e-20 {
            for i in 0..n {
                trial[i] = x[i] - step * g[i];
            }
            let ft = objective(&trial)?;
            // the round-off allowance keeps progress possible once f has flattened
            let allowance = 4.0 * f64::EPSILON * f.abs().max(1.0);
            if ft <= f - 0.5 * step * gnorm * gnorm + allowance {
                let tn = inner_grad(&trial, &mut trial_g)?;
                if ft < f || tn < gnorm {
                    std::mem::swap(&mut x, &mut trial);
                    std::mem::swap(&mut g, &mut trial_g);
                    f = ft;
                    gnorm = tn;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if gnorm < best.0 {
            best = (gnorm, x.clone());
        }
        if gnorm <= tol {
            return Ok(x);
        }
        if !accepted {
            break;
        }
    }
    Err(SaddleError::NoConvergence {
        residual: best.0,
        best: best.1,
        iterations: PROX_MAX_ITERS,
    })
}

/// The proximal surrogate `S̄(z, y) = min_x S(x, y) + ½‖x − z‖²`.
///
/// Gradients follow the envelope identities `∇_z S̄ = z − x̄` and
/// `∇_y S̄ = ∇ᵧS(x̄, y)`.
pub struct ProximalSurrogate {
    inner: SharedProblem,
    tol: f64,
}

impl fmt::Debug for ProximalSurrogate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProximalSurrogate")
            .field("n", &self.inner.dim_x())
            .field("m", &self.inner.dim_y())
            .field("tol", &self.tol)
            .finish()
    }
}

impl ProximalSurrogate {
    pub fn new(inner: SharedProblem, tol: f64) -> Self {
        Self { inner, tol }
    }

    pub fn argmin(&self, z: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        proximal_inner_argmin(self.inner.as_ref(), z, y, self.tol)
    }
}

impl SaddleProblem for ProximalSurrogate {
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }

    fn dim_y(&self) -> usize {
        self.inner.dim_y()
    }

    fn convexity(&self) -> ConvexityClass {
        ConvexityClass::ConvexConcave
    }

    fn value(&self, z: &[f64], y: &[f64]) -> Result<f64> {
        let xb = self.argmin(z, y)?;
        let d = distance(&xb, z);
        Ok(self.inner.value(&xb, y)? + 0.5 * d * d)
    }

    fn grad_x(&self, z: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        let xb = self.argmin(z, y)?;
        for i in 0..z.len() {
            out[i] = z[i] - xb[i];
        }
        Ok(())
    }

    fn grad_y(&self, z: &[f64], y: &[f64], out: &mut [f64]) -> Result<()> {
        let xb = self.argmin(z, y)?;
        self.inner.grad_y(&xb, y, out)
    }
}

/// The proximal flow over `[z, y]`: `ż = x̄(z, y) − z`, `ẏ = ∇ᵧS(x̄(z, y), y)`.
///
/// Requires a value oracle unless the problem has a closed-form prox.
pub fn proximal_field(prob: SharedProblem, tol: f64) -> Result<VectorField> {
    if !(tol > 0.0) {
        return Err(SaddleError::InvalidConfig(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let (n, m) = (prob.dim_x(), prob.dim_y());
    let eval = move |s: &[f64], out: &mut [f64]| {
        let (z, y) = s.split_at(n);
        let xb = proximal_inner_argmin(prob.as_ref(), z, y, tol)?;
        let (oz, oy) = out.split_at_mut(n);
        for i in 0..n {
            oz[i] = xb[i] - z[i];
        }
        prob.grad_y(&xb, y, oy)
    };
    VectorField::from_fn(FieldKind::Proximal, StateLayout::Proximal { n, m }, Vec::new(), eval)
}

/// Recovers the original saddle `(x, y)` from a converged augmented state.
pub fn extract_original_saddle(st: &AugmentedState, tol: f64) -> Result<PointPair> {
    let (x_gap, y_gap) = (st.x_gap(), st.y_gap());
    if x_gap <= tol && y_gap <= tol {
        Ok(PointPair::new(st.x.clone(), st.y.clone()))
    } else {
        Err(SaddleError::NotConverged { x_gap, y_gap, tol })
    }
}
