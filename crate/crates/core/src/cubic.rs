//! Stochastic adaptive cubic regularization (SARC).
//!
//! Same sampling, stopping test and adjusted ratio as
//! [`trust_region`](crate::trust_region), with the cubic model
//! `p(s) = m(s) + (σ/3)‖s‖³` in place of the trust region. After each
//! iteration `σ ← max(σ_min, r₁σ)` when `ρ > η` and `σ ← r₂σ` otherwise.

use serde::{Deserialize, Serialize};

use crate::driver::{self, fixed_point_tolerances, Common, Method};
use crate::error::{invalid, Result};
use crate::problem::FiniteSumProblem;
use crate::rng::SeedPath;
use crate::sampling::SamplingPolicy;
use crate::subproblem::{cubic_step, CubicModel, QuadraticModel, StepOutcome};
use crate::trace::SolveReport;
use crate::Vector;

/// Noise term subtracted in the adjusted ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseTerm {
    /// `2ε_h‖s‖²`
    #[default]
    StepNorm,
    /// `2ε_h/σ²`
    Sigma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SarcConfig {
    pub eps_grad: f64,
    pub eps_hess: f64,
    /// When unset: `ε_g = (1−η)(ε_∇f−ε_g)/220`, `ε_B = ε_h = (1−η)(ε_H−ε_B)/36`.
    pub eps_g: Option<f64>,
    pub eps_b: Option<f64>,
    pub eps_h: Option<f64>,
    pub eta: f64,
    /// Shrink factor for σ on very successful steps.
    pub r1: f64,
    /// Growth factor for σ on unsuccessful steps.
    pub r2: f64,
    pub sigma0: f64,
    pub sigma_min: f64,
    /// `κ_θ` in `‖∇p(s)‖ ≤ κ_θ min(1, ‖s‖)‖g‖`.
    pub kappa_theta: f64,
    /// Only used by the step-to-gradient certificate.
    pub zeta1: f64,
    pub zeta2: f64,
    pub delta_prob: f64,
    pub max_iters: usize,
    pub use_exact_subproblem: bool,
    pub noise: NoiseTerm,
    pub sampling: SamplingPolicy,
    pub diagnostics: bool,
}

impl Default for SarcConfig {
    fn default() -> Self {
        Self {
            eps_grad: 1e-2,
            eps_hess: 1e-2,
            eps_g: None,
            eps_b: None,
            eps_h: None,
            eta: 0.1,
            r1: 0.5,
            r2: 2.0,
            sigma0: 1.0,
            sigma_min: 1e-3,
            kappa_theta: 0.5,
            zeta1: 0.25,
            zeta2: 0.25,
            delta_prob: 0.1,
            max_iters: 500,
            use_exact_subproblem: true,
            noise: NoiseTerm::StepNorm,
            sampling: SamplingPolicy::Bernstein,
            diagnostics: false,
        }
    }
}

impl SarcConfig {
    /// Resolved `(ε_g, ε_B, ε_h)`.
    pub fn tolerances(&self) -> (f64, f64, f64) {
        let (g, b) =
            fixed_point_tolerances(self.eps_grad, self.eps_hess, (1.0 - self.eta) / 220.0, (1.0 - self.eta) / 36.0);
        (self.eps_g.unwrap_or(g), self.eps_b.unwrap_or(b), self.eps_h.unwrap_or(b))
    }

    pub(crate) fn common(&self) -> Common {
        let (eps_g, eps_b, eps_h) = self.tolerances();
        Common {
            eps_grad: self.eps_grad,
            eps_hess: self.eps_hess,
            eps_g,
            eps_b,
            eps_h,
            eta: self.eta,
            delta_prob: self.delta_prob,
            max_iters: self.max_iters,
            sampling: self.sampling,
            diagnostics: self.diagnostics,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r1 > 0.0 && self.r1 < 1.0) || !(self.r2 >= 1.0 && self.r2.is_finite()) {
            return Err(invalid(format!("need 0 < r1 < 1 <= r2 (got r1 = {}, r2 = {})", self.r1, self.r2)));
        }
        if !(self.sigma_min > 0.0 && self.sigma0 >= self.sigma_min && self.sigma0.is_finite()) {
            return Err(invalid(format!("need sigma0 >= sigma_min > 0 (got {} and {})", self.sigma0, self.sigma_min)));
        }
        if !(self.kappa_theta > 0.0 && self.kappa_theta < 1.0) {
            return Err(invalid(format!("kappa_theta must lie in (0, 1) (got {})", self.kappa_theta)));
        }
        if !(self.zeta1 > 0.0 && self.zeta1 < 1.0 && self.zeta2 > 0.0 && self.zeta2 < 1.0) {
            return Err(invalid("zeta1 and zeta2 must lie in (0, 1)"));
        }
        self.common().validate()
    }

    /// `σ_{k+1}` from `σ_k` and `ρ_k`.
    pub fn next_sigma(&self, sigma: f64, rho: f64) -> f64 {
        if rho > self.eta {
            (self.r1 * sigma).max(self.sigma_min)
        } else {
            self.r2 * sigma
        }
    }
}

impl Method for SarcConfig {
    fn step(&self, model: &QuadraticModel, sigma: f64) -> Result<Option<StepOutcome>> {
        let cubic = CubicModel::new(model.clone(), sigma)?;
        cubic_step(&cubic, self.use_exact_subproblem, self.kappa_theta)
    }

    fn noise(&self, eps_h: f64, step_norm: f64, sigma: f64) -> f64 {
        match self.noise {
            NoiseTerm::StepNorm => 2.0 * eps_h * step_norm * step_norm,
            NoiseTerm::Sigma => 2.0 * eps_h / (sigma * sigma),
        }
    }

    fn update(&self, sigma: f64, rho: f64) -> f64 {
        self.next_sigma(sigma, rho)
    }
}

/// Runs SARC from `x0`; see [`str_solve`](crate::str_solve) for the stream
/// and error conventions.
pub fn sarc_solve(
    problem: &FiniteSumProblem,
    config: &SarcConfig,
    x0: &Vector,
    stream: &SeedPath,
) -> Result<SolveReport> {
    config.validate()?;
    driver::solve(problem, &config.common(), config, config.sigma0, x0, stream)
}
