//! Finite-sum problems `f(x) = (1/n) Σ f_i(x)`.
//!
//! A problem is a set of component oracles ([`Components`]) plus the bound
//! constants used by the sample-size formulas and by the lemma checks. The
//! constants are only claimed on a declared box `‖x‖_∞ ≤ radius`; global
//! bounds do not exist for quadratics.

mod quadratic;
mod regression;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::{Matrix, Vector};

pub use quadratic::{make_convex_quadratic, make_indefinite_quadratic, QuadraticComponents, QuadraticSpec};
pub use regression::{make_nonconvex_regression, LabelModel, RegressionComponents, RegressionSpec};

/// Per-component oracles.
///
/// Gradients and Hessians are accumulated into caller buffers so that sums
/// over thousands of components do not allocate.
pub trait Components: Send + Sync + fmt::Debug {
    /// Number of components `n`.
    fn len(&self) -> usize;

    /// Dimension `d` of the decision variable.
    fn dim(&self) -> usize;

    fn value(&self, i: usize, x: &Vector) -> f64;

    /// `out += scale * ∇f_i(x)`
    fn add_gradient(&self, i: usize, x: &Vector, scale: f64, out: &mut Vector);

    /// `out += scale * ∇²f_i(x)`
    fn add_hessian(&self, i: usize, x: &Vector, scale: f64, out: &mut Matrix);

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Bound constants. Any of them may be unknown.
///
/// `h1` and `h2` bound the root mean squared deviation of the component
/// gradients and Hessians from their mean.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub lipschitz_hessian: Option<f64>,
    pub lipschitz_gradient: Option<f64>,
    pub kappa_f: Option<f64>,
    pub kappa_grad: Option<f64>,
    pub kappa_hess: Option<f64>,
    pub h1: Option<f64>,
    pub h2: Option<f64>,
}

/// Axis-aligned box `‖x‖_∞ ≤ radius` on which the constants are valid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub radius: f64,
}

impl BoxDomain {
    pub fn contains(&self, x: &Vector) -> bool {
        x.iter().all(|v| v.abs() <= self.radius)
    }

    /// Largest Euclidean norm of a point in the box.
    pub fn max_norm(&self, dim: usize) -> f64 {
        self.radius * (dim as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Value,
    Gradient,
    Hessian,
}

impl Quantity {
    fn name(self) -> &'static str {
        match self {
            Quantity::Value => "value",
            Quantity::Gradient => "gradient",
            Quantity::Hessian => "hessian",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Evaluation {
    Value(f64),
    Gradient(Vector),
    Hessian(Matrix),
}

/// A finite sum together with its bound constants and validity box.
///
/// Cloning is cheap; the components are shared.
#[derive(Clone)]
pub struct FiniteSumProblem {
    name: String,
    components: Arc<dyn Components>,
    constants: ProblemConstants,
    domain: BoxDomain,
}

impl fmt::Debug for FiniteSumProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteSumProblem")
            .field("name", &self.name)
            .field("n", &self.n())
            .field("d", &self.dim())
            .field("constants", &self.constants)
            .field("domain", &self.domain)
            .finish()
    }
}

impl FiniteSumProblem {
    pub fn new(
        name: impl Into<String>,
        components: Arc<dyn Components>,
        constants: ProblemConstants,
        domain: BoxDomain,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("a finite sum needs at least one component"));
        }
        if components.dim() == 0 {
            return Err(invalid("dimension must be positive"));
        }
        Ok(Self { name: name.into(), components, constants, domain })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components.dim()
    }

    pub fn constants(&self) -> &ProblemConstants {
        &self.constants
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn components(&self) -> &dyn Components {
        self.components.as_ref()
    }

    pub fn with_constants(mut self, constants: ProblemConstants) -> Self {
        self.constants = constants;
        self
    }

    pub(crate) fn check_point(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(invalid("evaluation point has non-finite entries"));
        }
        Ok(())
    }

    pub fn component_value(&self, i: usize, x: &Vector) -> Result<f64> {
        self.check_point(x)?;
        let v = self.components.value(i, x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { index: i, quantity: "value" })
        }
    }

    pub fn component_gradient(&self, i: usize, x: &Vector) -> Result<Vector> {
        self.check_point(x)?;
        let mut g = Vector::zeros(self.dim());
        self.components.add_gradient(i, x, 1.0, &mut g);
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(Error::NonFinite { index: i, quantity: "gradient" })
        }
    }

    pub fn component_hessian(&self, i: usize, x: &Vector) -> Result<Matrix> {
        self.check_point(x)?;
        let d = self.dim();
        let mut h = Matrix::zeros(d, d);
        self.components.add_hessian(i, x, 1.0, &mut h);
        if h.iter().all(|v| v.is_finite()) {
            Ok(h)
        } else {
            Err(Error::NonFinite { index: i, quantity: "hessian" })
        }
    }

    /// Average of the selected quantity over `indices`, summed in the given
    /// order and divided once by the count.
    pub fn average<I>(&self, x: &Vector, indices: I, what: Quantity) -> Result<Evaluation>
    where
        I: IntoIterator<Item = usize> + Clone,
    {
        self.check_point(x)?;
        let d = self.dim();
        let count = indices.clone().into_iter().count();
        if count == 0 {
            return Err(invalid("cannot average over an empty index set"));
        }
        let inv = 1.0 / count as f64;
        let out = match what {
            Quantity::Value => {
                let mut sum = 0.0;
                for i in indices.clone() {
                    sum += self.components.value(i, x);
                }
                Evaluation::Value(sum * inv)
            }
            Quantity::Gradient => {
                let mut g = Vector::zeros(d);
                for i in indices.clone() {
                    self.components.add_gradient(i, x, 1.0, &mut g);
                }
                g *= inv;
                Evaluation::Gradient(g)
            }
            Quantity::Hessian => {
                let mut h = Matrix::zeros(d, d);
                for i in indices.clone() {
                    self.components.add_hessian(i, x, 1.0, &mut h);
                }
                h *= inv;
                Evaluation::Hessian(h)
            }
        };
        if evaluation_is_finite(&out) {
            return Ok(out);
        }
        // Rescan to name the offending component.
        for i in indices {
            let bad = match what {
                Quantity::Value => self.component_value(i, x).is_err(),
                Quantity::Gradient => self.component_gradient(i, x).is_err(),
                Quantity::Hessian => self.component_hessian(i, x).is_err(),
            };
            if bad {
                return Err(Error::NonFinite { index: i, quantity: what.name() });
            }
        }
        // Finite components can still overflow when summed.
        Err(Error::NonFinite { index: usize::MAX, quantity: what.name() })
    }

    /// Exact full-sum evaluation `(1/n) Σ_i`.
    pub fn eval_full(&self, x: &Vector, what: Quantity) -> Result<Evaluation> {
        self.average(x, 0..self.n(), what)
    }

    pub fn full_value(&self, x: &Vector) -> Result<f64> {
        match self.eval_full(x, Quantity::Value)? {
            Evaluation::Value(v) => Ok(v),
            _ => unreachable!(),
        }
    }

    pub fn full_gradient(&self, x: &Vector) -> Result<Vector> {
        match self.eval_full(x, Quantity::Gradient)? {
            Evaluation::Gradient(g) => Ok(g),
            _ => unreachable!(),
        }
    }

    pub fn full_hessian(&self, x: &Vector) -> Result<Matrix> {
        match self.eval_full(x, Quantity::Hessian)? {
            Evaluation::Hessian(h) => Ok(h),
            _ => unreachable!(),
        }
    }

    /// Empirical `(1/n) Σ ‖∇f_i(x) − ∇f(x)‖²` and the Hessian analogue in
    /// spectral norm; the quantities bounded by `h1²` and `h2²`.
    pub fn component_variances(&self, x: &Vector) -> Result<(f64, f64)> {
        let g = self.full_gradient(x)?;
        let h = self.full_hessian(x)?;
        let mut var_g = 0.0;
        let mut var_h = 0.0;
        for i in 0..self.n() {
            var_g += (self.component_gradient(i, x)? - &g).norm_squared();
            let dev = self.component_hessian(i, x)? - &h;
            let norm = crate::subproblem::spectral_norm(&dev);
            var_h += norm * norm;
        }
        let n = self.n() as f64;
        Ok((var_g / n, var_h / n))
    }
}

fn evaluation_is_finite(e: &Evaluation) -> bool {
    match e {
        Evaluation::Value(v) => v.is_finite(),
        Evaluation::Gradient(g) => g.iter().all(|v| v.is_finite()),
        Evaluation::Hessian(h) => h.iter().all(|v| v.is_finite()),
    }
}

/// A problem built from closures, mainly for tests and small hand-made sums.
pub struct ClosureComponents<F, G, H> {
    n: usize,
    d: usize,
    value: F,
    gradient: G,
    hessian: H,
}

impl<F, G, H> ClosureComponents<F, G, H>
where
    F: Fn(usize, &Vector) -> f64 + Send + Sync,
    G: Fn(usize, &Vector) -> Vector + Send + Sync,
    H: Fn(usize, &Vector) -> Matrix + Send + Sync,
{
    pub fn new(n: usize, d: usize, value: F, gradient: G, hessian: H) -> Self {
        Self { n, d, value, gradient, hessian }
    }
}

impl<F, G, H> fmt::Debug for ClosureComponents<F, G, H> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosureComponents").field("n", &self.n).field("d", &self.d).finish()
    }
}

impl<F, G, H> Components for ClosureComponents<F, G, H>
where
    F: Fn(usize, &Vector) -> f64 + Send + Sync,
    G: Fn(usize, &Vector) -> Vector + Send + Sync,
    H: Fn(usize, &Vector) -> Matrix + Send + Sync,
{
    fn len(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, i: usize, x: &Vector) -> f64 {
        (self.value)(i, x)
    }

    fn add_gradient(&self, i: usize, x: &Vector, scale: f64, out: &mut Vector) {
        out.axpy(scale, &(self.gradient)(i, x), 1.0);
    }

    fn add_hessian(&self, i: usize, x: &Vector, scale: f64, out: &mut Matrix) {
        *out += (self.hessian)(i, x) * scale;
    }
}
