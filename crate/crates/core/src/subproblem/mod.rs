//! Local models and their step solvers.
//!
//! The quadratic model is `m(s) = f0 + ⟨g, s⟩ + ½⟨s, Bs⟩`; the cubic model
//! adds `(σ/3)‖s‖³`. Trust-region steps come from the Cauchy point, a
//! negative-curvature (eigen) step, or the global minimizer on the ball; cubic
//! steps from the closed-form Cauchy point or the global minimizer of the
//! cubic model.

mod cubic;
mod eigen;
mod secular;
mod trust;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::{Matrix, Vector};

pub use cubic::{cubic_cauchy_step, cubic_exact_step, cubic_residuals, CubicResiduals};
pub use eigen::{lanczos_smallest, smallest_eigenpair, spectral_norm, Spectrum, LANCZOS_THRESHOLD};
pub use trust::{tr_cauchy_step, tr_eigen_step, tr_exact_step};

/// Symmetry tolerance (relative to the largest entry) for model Hessians.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug)]
pub struct QuadraticModel {
    pub f0: f64,
    pub g: Vector,
    pub b: Matrix,
    spectrum: OnceLock<Spectrum>,
}

impl Clone for QuadraticModel {
    fn clone(&self) -> Self {
        let spectrum = OnceLock::new();
        if let Some(s) = self.spectrum.get() {
            let _ = spectrum.set(s.clone());
        }
        Self { f0: self.f0, g: self.g.clone(), b: self.b.clone(), spectrum }
    }
}

impl QuadraticModel {
    pub fn new(f0: f64, g: Vector, b: Matrix) -> Result<Self> {
        if b.nrows() != g.len() {
            return Err(crate::Error::DimensionMismatch { expected: g.len(), got: b.nrows() });
        }
        eigen::check_symmetric(&b, SYMMETRY_TOL)?;
        if !g.iter().chain(b.iter()).all(|v| v.is_finite()) || !f0.is_finite() {
            return Err(invalid("model data must be finite"));
        }
        Ok(Self { f0, g, b, spectrum: OnceLock::new() })
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    /// Cached ascending eigendecomposition of `B`.
    pub fn spectrum(&self) -> &Spectrum {
        self.spectrum.get_or_init(|| Spectrum::of(&self.b))
    }

    pub fn lambda_min(&self) -> f64 {
        self.spectrum().min()
    }

    pub fn hessian_norm(&self) -> f64 {
        self.spectrum().norm()
    }

    pub fn value(&self, s: &Vector) -> f64 {
        self.f0 + self.g.dot(s) + 0.5 * s.dot(&(&self.b * s))
    }

    /// `m(0) − m(s)`
    pub fn decrease(&self, s: &Vector) -> f64 {
        -(self.g.dot(s) + 0.5 * s.dot(&(&self.b * s)))
    }
}

#[derive(Debug, Clone)]
pub struct CubicModel {
    pub base: QuadraticModel,
    pub sigma: f64,
}

impl CubicModel {
    pub fn new(base: QuadraticModel, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(invalid(format!("sigma must be positive and finite (got {sigma})")));
        }
        Ok(Self { base, sigma })
    }

    pub fn value(&self, s: &Vector) -> f64 {
        self.base.value(s) + self.sigma / 3.0 * s.norm().powi(3)
    }

    /// `p(0) − p(s)`
    pub fn decrease(&self, s: &Vector) -> f64 {
        self.base.decrease(s) - self.sigma / 3.0 * s.norm().powi(3)
    }

    /// `∇p(s) = g + Bs + σ‖s‖s`
    pub fn gradient(&self, s: &Vector) -> Vector {
        &self.base.g + &self.base.b * s + s * (self.sigma * s.norm())
    }
}

/// Either model, for [`model_decrease`].
#[derive(Debug, Clone, Copy)]
pub enum Model<'a> {
    Quadratic(&'a QuadraticModel),
    Cubic(&'a CubicModel),
}

/// `m(0) − m(s)` or `p(0) − p(s)`.
pub fn model_decrease(model: Model<'_>, s: &Vector) -> f64 {
    match model {
        Model::Quadratic(m) => m.decrease(s),
        Model::Cubic(p) => p.decrease(s),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMethod {
    Cauchy,
    Eigen,
    Exact,
}

impl StepMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            StepMethod::Cauchy => "cauchy",
            StepMethod::Eigen => "eigen",
            StepMethod::Exact => "exact",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub s: Vector,
    pub model_decrease: f64,
    pub method: StepMethod,
    /// The exact solver failed and a Cauchy/eigen step was substituted.
    pub fallback: bool,
    /// Cubic steps: whether the stationarity, curvature and gradient
    /// conditions hold.
    pub conditions_ok: Option<[bool; 3]>,
    pub residuals: Option<CubicResiduals>,
    /// Achieved `‖∇p(s)‖ / ‖g‖`.
    pub theta: Option<f64>,
}

impl StepOutcome {
    pub(crate) fn plain(s: Vector, model_decrease: f64, method: StepMethod) -> Self {
        Self { s, model_decrease, method, fallback: false, conditions_ok: None, residuals: None, theta: None }
    }

    pub fn step_norm(&self) -> f64 {
        self.s.norm()
    }
}

/// Trust-region step selection.
///
/// With `use_exact` the global minimizer on the ball is returned. Otherwise
/// the Cauchy step (when `g ≠ 0`) and the eigen step (when `λ_min(B) < 0`)
/// are both computed and the one with the larger model decrease wins.
/// `None` means no step can decrease the model (`g = 0`, `B ⪰ 0`).
pub fn tr_step(model: &QuadraticModel, radius: f64, use_exact: bool) -> Result<Option<StepOutcome>> {
    if use_exact {
        let out = tr_exact_step(model, radius)?;
        return Ok(if out.s.norm() == 0.0 { None } else { Some(out) });
    }
    let cauchy = if model.g.norm() > 0.0 { Some(tr_cauchy_step(model, radius)?) } else { None };
    let eigen = if model.lambda_min() < 0.0 { Some(tr_eigen_step(model, radius)?) } else { None };
    Ok(match (cauchy, eigen) {
        (Some(c), Some(e)) => Some(if e.model_decrease > c.model_decrease { e } else { c }),
        (c, e) => c.or(e),
    })
}

/// Cubic step selection: Cauchy point unless `use_exact`; the exact step
/// falls back to the Cauchy point when the gradient condition fails. With
/// `g = 0` only the exact solver can move.
pub fn cubic_step(model: &CubicModel, use_exact: bool, kappa_theta: f64) -> Result<Option<StepOutcome>> {
    let g_zero = model.base.g.norm() == 0.0;
    if use_exact || g_zero {
        let exact = cubic_exact_step(model, kappa_theta)?;
        if exact.s.norm() == 0.0 {
            return Ok(None);
        }
        let ok = exact.conditions_ok.map(|c| c[2]).unwrap_or(false);
        if ok || g_zero {
            return Ok(Some(exact));
        }
        let mut c = cubic_cauchy_step(model)?;
        c.fallback = true;
        return Ok(Some(c));
    }
    Ok(Some(cubic_cauchy_step(model)?))
}
