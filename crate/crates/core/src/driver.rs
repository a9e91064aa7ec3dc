//! The outer loop shared by both solvers. Only the step computation, the
//! noise term of the adjusted ratio and the radius/σ update differ.

use crate::error::{invalid, Error, Result};
use crate::problem::FiniteSumProblem;
use crate::rng::SeedPath;
use crate::sampling::{
    draw_subset, estimate_gradient, estimate_hessian, estimate_value, SampleKind, SamplingPolicy, SizingContext,
};
use crate::subproblem::{spectral_norm, QuadraticModel, StepOutcome};
use crate::trace::{ExactDiagnostics, IterationRecord, SolveReport, SolveStatus};
use crate::Vector;

pub(crate) struct Common {
    pub eps_grad: f64,
    pub eps_hess: f64,
    pub eps_g: f64,
    pub eps_b: f64,
    pub eps_h: f64,
    pub eta: f64,
    pub delta_prob: f64,
    pub max_iters: usize,
    pub sampling: SamplingPolicy,
    pub diagnostics: bool,
}

impl Common {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.eps_grad) || !pos(self.eps_hess) {
            return Err(invalid("eps_grad and eps_hess must be positive"));
        }
        if !(pos(self.eps_g) && self.eps_g < self.eps_grad) {
            return Err(invalid(format!("need 0 < eps_g < eps_grad (got {} vs {})", self.eps_g, self.eps_grad)));
        }
        if !(pos(self.eps_b) && self.eps_b < self.eps_hess) {
            return Err(invalid(format!("need 0 < eps_b < eps_hess (got {} vs {})", self.eps_b, self.eps_hess)));
        }
        if !(self.eps_h >= 0.0 && self.eps_h.is_finite()) {
            return Err(invalid("eps_h must be nonnegative"));
        }
        if self.eps_h == 0.0 && self.sampling == SamplingPolicy::Bernstein {
            return Err(invalid("Bernstein sampling needs eps_h > 0"));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(invalid(format!("eta must lie in (0, 1) (got {})", self.eta)));
        }
        if !(self.delta_prob > 0.0 && self.delta_prob < 1.0) {
            return Err(invalid(format!("delta_prob must lie in (0, 1) (got {})", self.delta_prob)));
        }
        self.sampling.validate()
    }
}

/// The method-specific parts of an iteration.
pub(crate) trait Method {
    fn step(&self, model: &QuadraticModel, param: f64) -> Result<Option<StepOutcome>>;
    /// Subtracted from the numerator of `ρ̃` to form `ρ`.
    fn noise(&self, eps_h: f64, step_norm: f64, param: f64) -> f64;
    fn update(&self, param: f64, rho: f64) -> f64;
}

/// `(ε_g, ε_B = ε_h)` solving `ε_g = c₁(ε_∇f − ε_g)`, `ε_B = c₂(ε_H − ε_B)`.
pub(crate) fn fixed_point_tolerances(eps_grad: f64, eps_hess: f64, c1: f64, c2: f64) -> (f64, f64) {
    (c1 * eps_grad / (1.0 + c1), c2 * eps_hess / (1.0 + c2))
}

struct Iterate<'a> {
    problem: &'a FiniteSumProblem,
    common: &'a Common,
    ctx: SizingContext,
}

enum Outcome {
    Converged(IterationRecord),
    Step { record: IterationRecord, next: Option<Vector>, param: f64 },
}

impl Iterate<'_> {
    fn exact(&self, x: &Vector, model: &QuadraticModel) -> Result<ExactDiagnostics> {
        let p = self.problem;
        let grad = p.full_gradient(x)?;
        let hess = p.full_hessian(x)?;
        let sym = (&hess + hess.transpose()) * 0.5;
        Ok(ExactDiagnostics {
            f: p.full_value(x)?,
            grad_norm: grad.norm(),
            lambda_min: crate::subproblem::Spectrum::of(&sym).min(),
            grad_error: (&grad - &model.g).norm(),
            hess_error: spectral_norm(&(&sym - &model.b)),
            f_trial: None,
        })
    }

    fn run<M: Method>(&self, method: &M, k: usize, x: &Vector, param: f64, stream: &SeedPath) -> Result<Outcome> {
        let p = self.problem;
        let c = self.common;
        let n = p.n();
        let draw = |size, kind: SampleKind| draw_subset(n, size, kind, &stream.child(kind.stream_label()));

        let (size_g, size_b) = c.sampling.gradient_hessian_sizes(k, &self.ctx)?;
        let set_g = draw(size_g, SampleKind::Gradient)?;
        let set_b = draw(size_b, SampleKind::Hessian)?;
        let g = estimate_gradient(p, x, &set_g)?;
        let b = estimate_hessian(p, x, &set_b)?;
        let b = (&b + b.transpose()) * 0.5;
        let model = QuadraticModel::new(0.0, g, b)?;
        let gnorm = model.g.norm();
        let lmin = model.lambda_min();
        let mut exact = if c.diagnostics { Some(self.exact(x, &model)?) } else { None };

        let mut record = IterationRecord {
            k,
            radius: param,
            rho_tilde: 0.0,
            rho: 0.0,
            success: false,
            size_g,
            size_b,
            size_h: 0,
            step_norm: 0.0,
            sampled_grad_norm: gnorm,
            sampled_lambda_min: lmin,
            sampled_hess_norm: model.hessian_norm(),
            h_current: 0.0,
            h_trial: 0.0,
            model_decrease: 0.0,
            method: None,
            shortcut: false,
            fallback: false,
            conditions_ok: None,
            residuals: None,
            theta: None,
            exact,
        };

        if gnorm <= c.eps_grad - c.eps_g && lmin >= -(c.eps_hess - c.eps_b) {
            return Ok(Outcome::Converged(record));
        }
        record.shortcut = gnorm <= c.eps_grad + c.eps_g;

        let Some(step) = method.step(&model, param)? else {
            return Ok(Outcome::Step { record, next: None, param: method.update(param, 0.0) });
        };
        let snorm = step.s.norm();
        let set_h = if record.shortcut {
            set_g.reuse_as(SampleKind::Function)
        } else {
            draw(c.sampling.function_size(k, &self.ctx, snorm)?, SampleKind::Function)?
        };
        let trial = x + &step.s;
        let h_current = estimate_value(p, x, &set_h)?;
        let h_trial = estimate_value(p, &trial, &set_h)?;
        let pred = step.model_decrease;
        let (rho_tilde, rho) = if pred > 0.0 {
            let rt = (h_current - h_trial) / pred;
            (rt, rt - method.noise(c.eps_h, snorm, param) / pred)
        } else {
            (0.0, 0.0)
        };
        if !rho.is_finite() {
            return Err(Error::NonFinite { index: k, quantity: "acceptance ratio" });
        }
        let success = pred > 0.0 && rho >= c.eta;
        if let Some(e) = exact.as_mut() {
            e.f_trial = Some(p.full_value(&trial)?);
        }

        record.rho_tilde = rho_tilde;
        record.rho = rho;
        record.success = success;
        record.size_h = set_h.len();
        record.step_norm = snorm;
        record.h_current = h_current;
        record.h_trial = h_trial;
        record.model_decrease = pred;
        record.method = Some(step.method);
        record.fallback = step.fallback;
        record.conditions_ok = step.conditions_ok;
        record.residuals = step.residuals;
        record.theta = step.theta;
        record.exact = exact;
        let param = method.update(param, rho);
        Ok(Outcome::Step { record, next: success.then_some(trial), param })
    }
}

pub(crate) fn solve<M: Method>(
    problem: &FiniteSumProblem,
    common: &Common,
    method: &M,
    param0: f64,
    x0: &Vector,
    stream: &SeedPath,
) -> Result<SolveReport> {
    common.validate()?;
    problem.check_point(x0)?;
    let consts = problem.constants();
    let it = Iterate {
        problem,
        common,
        ctx: SizingContext {
            n: problem.n(),
            d: problem.dim(),
            delta: common.delta_prob,
            eps_g: common.eps_g,
            eps_b: common.eps_b,
            eps_h: common.eps_h,
            kappa_f: consts.kappa_f,
            kappa_grad: consts.kappa_grad,
            kappa_hess: consts.kappa_hess,
            h1: consts.h1.unwrap_or(0.0),
            h2: consts.h2.unwrap_or(0.0),
        },
    };
    // surface missing constants before the first iteration
    common.sampling.gradient_hessian_sizes(0, &it.ctx)?;
    if common.sampling == SamplingPolicy::Bernstein && consts.kappa_f.is_none() {
        return Err(invalid("Bernstein sampling needs kappa_f"));
    }

    let mut x = x0.clone();
    let mut param = param0;
    let mut trace = Vec::new();
    let mut status = SolveStatus::BudgetExhausted;
    for k in 0..common.max_iters {
        match it.run(method, k, &x, param, &stream.child(k as u64)) {
            Ok(Outcome::Converged(record)) => {
                trace.push(record);
                status = SolveStatus::Converged;
                break;
            }
            Ok(Outcome::Step { record, next, param: p }) => {
                trace.push(record);
                if let Some(next) = next {
                    x = next;
                }
                param = p;
            }
            Err(e) => {
                status = SolveStatus::Aborted(e.to_string());
                break;
            }
        }
    }

    let final_exact = if !common.diagnostics {
        None
    } else if let (SolveStatus::Converged, Some(last)) = (&status, trace.last()) {
        last.exact
    } else {
        match (problem.full_value(&x), problem.full_gradient(&x), problem.full_hessian(&x)) {
            (Ok(f), Ok(g), Ok(h)) => {
                let sym = (&h + h.transpose()) * 0.5;
                Some(ExactDiagnostics {
                    f,
                    grad_norm: g.norm(),
                    lambda_min: crate::subproblem::Spectrum::of(&sym).min(),
                    grad_error: 0.0,
                    hess_error: 0.0,
                    f_trial: None,
                })
            }
            _ => None,
        }
    };
    Ok(SolveReport { x, trace, status, final_exact })
}
