//! Stochastic trust region (STR).
//!
//! Each iteration draws `S_g`, `S_B`, forms the subsampled model, stops if
//! `‖g‖ ≤ ε_∇f − ε_g` and `λ_min(B) ≥ −(ε_H − ε_B)`, and otherwise solves the
//! trust-region subproblem. Function values are estimated on `S_h` (equal to
//! `S_g` when `‖g‖ ≤ ε_∇f + ε_g`), and the step is accepted when
//!
//! ```text
//! ρ = (h(x) − h(x+s) − 2ε_h‖s‖²) / (m(0) − m(s)) ≥ η.
//! ```
//!
//! The radius becomes `min(Δ_max, r₂Δ)` when `ρ > η` and `r₁Δ` otherwise.

use serde::{Deserialize, Serialize};

use crate::driver::{self, fixed_point_tolerances, Common, Method};
use crate::error::{invalid, Result};
use crate::problem::FiniteSumProblem;
use crate::rng::SeedPath;
use crate::sampling::SamplingPolicy;
use crate::subproblem::{tr_step, QuadraticModel, StepOutcome};
use crate::trace::SolveReport;
use crate::Vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrConfig {
    /// Target gradient tolerance `ε_∇f`.
    pub eps_grad: f64,
    /// Target curvature tolerance `ε_H`.
    pub eps_hess: f64,
    /// Gradient, Hessian and function-value approximation tolerances. When
    /// unset they follow the schedule `ε_g = (1−η)(ε_∇f−ε_g)/16`,
    /// `ε_B = ε_h = (1−η)(ε_H−ε_B)/10`.
    pub eps_g: Option<f64>,
    pub eps_b: Option<f64>,
    pub eps_h: Option<f64>,
    pub eta: f64,
    pub r1: f64,
    pub r2: f64,
    pub delta0: f64,
    pub delta_max: f64,
    /// Failure probability `δ` of the sample-size bounds.
    pub delta_prob: f64,
    pub max_iters: usize,
    pub use_exact_subproblem: bool,
    pub sampling: SamplingPolicy,
    /// Record full-sum diagnostics for every iteration.
    pub diagnostics: bool,
}

impl Default for StrConfig {
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
            delta0: 1.0,
            delta_max: 10.0,
            delta_prob: 0.1,
            max_iters: 500,
            use_exact_subproblem: false,
            sampling: SamplingPolicy::Bernstein,
            diagnostics: false,
        }
    }
}

impl StrConfig {
    /// Resolved `(ε_g, ε_B, ε_h)`.
    pub fn tolerances(&self) -> (f64, f64, f64) {
        let (g, b) =
            fixed_point_tolerances(self.eps_grad, self.eps_hess, (1.0 - self.eta) / 16.0, (1.0 - self.eta) / 10.0);
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
        if !(self.delta0 > 0.0 && self.delta0 <= self.delta_max && self.delta_max.is_finite()) {
            return Err(invalid(format!("need 0 < delta0 <= delta_max (got {} and {})", self.delta0, self.delta_max)));
        }
        self.common().validate()
    }

    /// `Δ_{k+1}` from `Δ_k` and `ρ_k`.
    pub fn next_radius(&self, radius: f64, rho: f64) -> f64 {
        if rho > self.eta {
            (self.r2 * radius).min(self.delta_max)
        } else {
            self.r1 * radius
        }
    }
}

impl Method for StrConfig {
    fn step(&self, model: &QuadraticModel, radius: f64) -> Result<Option<StepOutcome>> {
        tr_step(model, radius, self.use_exact_subproblem)
    }

    fn noise(&self, eps_h: f64, step_norm: f64, _radius: f64) -> f64 {
        2.0 * eps_h * step_norm * step_norm
    }

    fn update(&self, radius: f64, rho: f64) -> f64 {
        self.next_radius(radius, rho)
    }
}

/// Runs STR from `x0`. Iteration `k` draws its samples from
/// `stream.child(k)`, so runs are reproducible from the seed path alone.
///
/// Invalid configurations and missing constants return an error; a
/// non-finite evaluation mid-run ends the run with
/// [`SolveStatus::Aborted`](crate::SolveStatus::Aborted) and the trace so far.
pub fn str_solve(
    problem: &FiniteSumProblem,
    config: &StrConfig,
    x0: &Vector,
    stream: &SeedPath,
) -> Result<SolveReport> {
    config.validate()?;
    driver::solve(problem, &config.common(), config, config.delta0, x0, stream)
}
