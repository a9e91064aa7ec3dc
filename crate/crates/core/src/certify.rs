//! Runtime checks of the decrease, gap and parameter bounds behind the
//! convergence analysis, evaluated on recorded iterations.
//!
//! Each check reports a margin `bound − value` (nonnegative when it holds,
//! up to a small relative tolerance). A check whose hypotheses fail at that
//! iteration is [`CheckStatus::NotApplicable`]; one that needs a constant the
//! problem does not supply, or full-sum diagnostics that were not recorded,
//! is [`CheckStatus::MissingInput`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cubic::SarcConfig;
use crate::problem::ProblemConstants;
use crate::subproblem::StepMethod;
use crate::trace::IterationRecord;
use crate::trust_region::StrConfig;

/// Relative slack for rounding in the checks.
pub const CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Passed,
    Failed,
    NotApplicable,
    MissingInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: &'static str,
    pub k: usize,
    pub status: CheckStatus,
    /// `bound − value`; NaN unless the check was evaluated.
    pub margin: f64,
}

impl Check {
    fn eval(name: &'static str, k: usize, value: f64, bound: f64) -> Self {
        let margin = bound - value;
        let tol = CHECK_TOL * (1.0 + bound.abs().max(value.abs()));
        let status = if margin >= -tol { CheckStatus::Passed } else { CheckStatus::Failed };
        Check { name, k, status, margin }
    }

    fn skip(name: &'static str, k: usize, status: CheckStatus) -> Self {
        Check { name, k, status, margin: f64::NAN }
    }
}

/// Everything the checks need besides the records themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifyContext {
    pub n: usize,
    pub eps_grad: f64,
    pub eps_hess: f64,
    pub eps_g: f64,
    pub eps_b: f64,
    pub eps_h: f64,
    pub eta: f64,
    pub r1: f64,
    pub r2: f64,
    pub kappa_theta: f64,
    pub zeta1: f64,
    pub zeta2: f64,
    pub sigma0: f64,
    pub constants: ProblemConstants,
}

impl CertifyContext {
    pub fn for_str(config: &StrConfig, n: usize, constants: ProblemConstants) -> Self {
        let (eps_g, eps_b, eps_h) = config.tolerances();
        Self {
            n,
            eps_grad: config.eps_grad,
            eps_hess: config.eps_hess,
            eps_g,
            eps_b,
            eps_h,
            eta: config.eta,
            r1: config.r1,
            r2: config.r2,
            kappa_theta: f64::NAN,
            zeta1: f64::NAN,
            zeta2: f64::NAN,
            sigma0: f64::NAN,
            constants,
        }
    }

    pub fn for_sarc(config: &SarcConfig, n: usize, constants: ProblemConstants) -> Self {
        let (eps_g, eps_b, eps_h) = config.tolerances();
        Self {
            n,
            eps_grad: config.eps_grad,
            eps_hess: config.eps_hess,
            eps_g,
            eps_b,
            eps_h,
            eta: config.eta,
            r1: config.r1,
            r2: config.r2,
            kappa_theta: config.kappa_theta,
            zeta1: config.zeta1,
            zeta2: config.zeta2,
            sigma0: config.sigma0,
            constants,
        }
    }

    /// `𝟙(|S_h| < n)/|S_h|`
    fn subsample_factor(&self, size_h: usize) -> f64 {
        if size_h < self.n {
            1.0 / size_h as f64
        } else {
            0.0
        }
    }

    /// The approximation event at this iterate: sampled gradient and Hessian
    /// within `ε_g`, `ε_B` of the exact ones.
    fn approximation_holds(&self, r: &IterationRecord) -> Option<bool> {
        r.exact.map(|e| e.grad_error <= self.eps_g && e.hess_error <= self.eps_b)
    }
}

/// Sampled Cauchy bound `½‖g‖ min{Δ, ‖g‖/‖B‖}`, implied for every step the
/// solver returns (all of them dominate the Cauchy point).
fn tr_cauchy_check(r: &IterationRecord) -> Check {
    const NAME: &str = "tr_cauchy_decrease";
    if r.sampled_grad_norm == 0.0 {
        return Check::skip(NAME, r.k, CheckStatus::NotApplicable);
    }
    let g = r.sampled_grad_norm;
    let bound = 0.5 * g * r.radius.min(g / r.sampled_hess_norm);
    Check::eval(NAME, r.k, -r.model_decrease, -bound)
}

/// Per-iteration checks for a trust-region record.
pub fn str_certify_iteration(r: &IterationRecord, ctx: &CertifyContext) -> Vec<Check> {
    let k = r.k;
    if r.method.is_none() {
        return Vec::new();
    }
    let mut out = vec![tr_cauchy_check(r)];

    // negative-curvature branch with the sampled matrix
    out.push(if r.sampled_lambda_min < 0.0 {
        let bound = -0.5 * r.sampled_lambda_min * r.radius * r.radius;
        Check::eval("tr_eigen_decrease", k, -r.model_decrease, -bound)
    } else {
        Check::skip("tr_eigen_decrease", k, CheckStatus::NotApplicable)
    });

    // the same two branches with the analysis constants
    let margin_g = ctx.eps_grad - ctx.eps_g;
    let margin_h = ctx.eps_hess - ctx.eps_b;
    out.push(match (r.exact, ctx.constants.kappa_hess) {
        (None, _) | (_, None) => Check::skip("lemma_gradient_decrease", k, CheckStatus::MissingInput),
        (Some(e), Some(kh)) => {
            let holds = e.grad_norm > ctx.eps_grad && e.grad_error <= ctx.eps_g && r.sampled_hess_norm <= kh;
            if holds {
                let bound = 0.5 * margin_g * r.radius.min(margin_g / kh);
                Check::eval("lemma_gradient_decrease", k, -r.model_decrease, -bound)
            } else {
                Check::skip("lemma_gradient_decrease", k, CheckStatus::NotApplicable)
            }
        }
    });
    out.push(match r.exact {
        None => Check::skip("lemma_curvature_decrease", k, CheckStatus::MissingInput),
        Some(e) if e.lambda_min <= -ctx.eps_hess && e.hess_error <= ctx.eps_b => {
            let bound = 0.5 * margin_h * r.radius * r.radius;
            Check::eval("lemma_curvature_decrease", k, -r.model_decrease, -bound)
        }
        Some(_) => Check::skip("lemma_curvature_decrease", k, CheckStatus::NotApplicable),
    });

    // model/function gap
    let c = &ctx.constants;
    out.push(match (c.h1, c.h2, c.lipschitz_hessian) {
        (Some(h1), Some(h2), Some(lh)) => {
            let f = ctx.subsample_factor(r.size_h);
            let d = r.radius;
            let second = 1.5 * (f * h2 + lh * d + ctx.eps_b) * d * d;
            let bound = if r.shortcut { second } else { 2.0 * (f * h1 + ctx.eps_g) * d + second };
            let gap = r.model_decrease - (r.h_current - r.h_trial);
            Check::eval("tr_model_gap", k, gap, bound)
        }
        _ => Check::skip("tr_model_gap", k, CheckStatus::MissingInput),
    });

    out.extend(ratio_checks(r, ctx));
    out
}

/// `|ρ_exact − ρ̃| ≤ 2ε_h‖s‖²/pred` and acceptance soundness, under the
/// event `|f − h| ≤ ε_h‖s‖²` at both points.
fn ratio_checks(r: &IterationRecord, ctx: &CertifyContext) -> Vec<Check> {
    let k = r.k;
    let Some(e) = r.exact else {
        return vec![
            Check::skip("ratio_sandwich", k, CheckStatus::MissingInput),
            Check::skip("acceptance_soundness", k, CheckStatus::MissingInput),
        ];
    };
    let Some(f_trial) = e.f_trial else {
        return Vec::new();
    };
    let pred = r.model_decrease;
    let s2 = r.step_norm * r.step_norm;
    let event = (e.f - r.h_current).abs() <= ctx.eps_h * s2 && (f_trial - r.h_trial).abs() <= ctx.eps_h * s2;
    if !(pred > 0.0) || !event {
        return vec![
            Check::skip("ratio_sandwich", k, CheckStatus::NotApplicable),
            Check::skip("acceptance_soundness", k, CheckStatus::NotApplicable),
        ];
    }
    let rho_exact = (e.f - f_trial) / pred;
    let mut out = vec![Check::eval("ratio_sandwich", k, (rho_exact - r.rho_tilde).abs(), 2.0 * ctx.eps_h * s2 / pred)];
    out.push(if r.rho >= ctx.eta {
        Check::eval("acceptance_soundness", k, ctx.eta, rho_exact)
    } else {
        Check::skip("acceptance_soundness", k, CheckStatus::NotApplicable)
    });
    out
}

/// `κ_s` for the step-to-gradient bound, with the branch chosen by `‖s‖`.
/// `None` when the denominator is not positive.
pub fn kappa_s(ctx: &CertifyContext, sigma: f64, theta: f64, step_norm: f64, lh: f64, lg: f64) -> Option<f64> {
    let kt = ctx.kappa_theta;
    let (num, den) = if step_norm >= 1.0 {
        (2.0 * ctx.eps_b + lh + sigma + 2.0 * kt * ctx.eps_g + kt * lg, 1.0 - theta)
    } else {
        (lh + sigma + kt * lg, 1.0 - theta - 2.0 * ctx.zeta1 - 2.0 * kt * ctx.zeta2)
    };
    (den > 0.0).then(|| num / den)
}

/// Upper bound on `σ_k` as `(σ_max1, σ_max2)`; `None` without `κ_H`, `L_H`.
pub fn sigma_max(ctx: &CertifyContext) -> Option<(f64, f64)> {
    let kh = ctx.constants.kappa_hess?;
    let lh = ctx.constants.lipschitz_hessian?;
    let m = ctx.eps_grad - ctx.eps_g;
    let noise = 304.0 * (3.0 * ctx.eps_b + 2.0 * ctx.eps_h);
    let kappa4 = ctx.r2 * (kh * kh).max(noise * noise / (1.0 - ctx.eta)).max(4.5 * m * lh);
    Some((kappa4 / m, 4.5 * ctx.r2 * lh))
}

/// Per-iteration checks for a cubic-regularization record. `next` is the
/// following record (for the gradient-at-next-iterate bound) and
/// `sigma_seen` the largest `σ` up to and including this iteration.
pub fn sarc_certify_iteration(
    r: &IterationRecord,
    next: Option<&IterationRecord>,
    sigma_seen: f64,
    ctx: &CertifyContext,
) -> Vec<Check> {
    let k = r.k;
    let sigma = r.radius;
    let mut out = Vec::new();

    out.push(match sigma_max(ctx) {
        Some((m1, m2)) => Check::eval("sigma_bound", k, sigma_seen, m1.max(m2).max(ctx.sigma0)),
        None => Check::skip("sigma_bound", k, CheckStatus::MissingInput),
    });
    let Some(method) = r.method else {
        return out;
    };
    let g = r.sampled_grad_norm;
    let s = r.step_norm;

    // Cauchy decrease: holds for every step since the exact minimizer
    // dominates the Cauchy point
    out.push(if g > 0.0 {
        let bound = 0.1 * g * (g / r.sampled_hess_norm).min((g / sigma).sqrt());
        Check::eval("cubic_cauchy_decrease", k, -r.model_decrease, -bound)
    } else {
        Check::skip("cubic_cauchy_decrease", k, CheckStatus::NotApplicable)
    });
    out.push(if method == StepMethod::Cauchy {
        let bound = 2.75 * (r.sampled_hess_norm / sigma).max((g / sigma).sqrt());
        Check::eval("cubic_cauchy_step_norm", k, s, bound)
    } else {
        Check::skip("cubic_cauchy_step_norm", k, CheckStatus::NotApplicable)
    });

    let exact_ok = method == StepMethod::Exact && r.conditions_ok.is_some_and(|c| c[0] && c[1]);
    out.push(match (exact_ok, r.residuals) {
        (true, Some(res)) => {
            // p(0) − p(s) = ½(sᵀBs + σ‖s‖³) + σ‖s‖³/6 − stationarity residual
            let slack = res.stationarity.abs() + 0.5 * res.curvature.min(0.0).abs();
            Check::eval("cubic_exact_decrease", k, -r.model_decrease - slack, -sigma / 6.0 * s.powi(3))
        }
        _ => Check::skip("cubic_exact_decrease", k, CheckStatus::NotApplicable),
    });

    let c = &ctx.constants;
    out.push(match (c.lipschitz_hessian, c.lipschitz_gradient, r.theta) {
        (Some(lh), Some(lg), Some(theta)) => {
            let all_ok = method == StepMethod::Exact && r.conditions_ok == Some([true; 3]);
            let nxt = next.filter(|n| r.success && n.k == k + 1);
            let hyp = all_ok
                && ctx.eps_b <= ctx.zeta1 * (ctx.eps_grad - ctx.eps_g)
                && ctx.eps_g <= ctx.zeta2 * (ctx.eps_grad - ctx.eps_g)
                && nxt.is_some_and(|n| n.sampled_grad_norm >= ctx.eps_grad - ctx.eps_g)
                && ctx.approximation_holds(r) == Some(true)
                && nxt.and_then(|n| ctx.approximation_holds(n)) == Some(true);
            match (hyp, kappa_s(ctx, sigma, theta, s, lh, lg)) {
                (true, Some(ks)) => Check::eval("step_gradient_bound", k, nxt.unwrap().sampled_grad_norm, ks * s * s),
                _ => Check::skip("step_gradient_bound", k, CheckStatus::NotApplicable),
            }
        }
        _ => Check::skip("step_gradient_bound", k, CheckStatus::MissingInput),
    });

    out.push(match (c.h1, c.h2, c.lipschitz_hessian) {
        (Some(h1), Some(h2), Some(lh)) => {
            let f = ctx.subsample_factor(r.size_h);
            let tail = 1.5 * (f * h2 + ctx.eps_b) * s * s + (1.5 * lh - sigma / 3.0) * s.powi(3);
            let bound = if r.shortcut { tail } else { 2.0 * (f * h1 + ctx.eps_g) * s + tail };
            let gap = r.model_decrease - (r.h_current - r.h_trial);
            Check::eval("cubic_model_gap", k, gap, bound)
        }
        _ => Check::skip("cubic_model_gap", k, CheckStatus::MissingInput),
    });

    out.extend(ratio_checks(r, ctx));
    out
}

pub fn certify_str_trace(trace: &[IterationRecord], ctx: &CertifyContext) -> Vec<Check> {
    trace.iter().flat_map(|r| str_certify_iteration(r, ctx)).collect()
}

pub fn certify_sarc_trace(trace: &[IterationRecord], ctx: &CertifyContext) -> Vec<Check> {
    let mut seen = f64::NEG_INFINITY;
    let mut out = Vec::new();
    for (i, r) in trace.iter().enumerate() {
        seen = seen.max(r.radius);
        out.extend(sarc_certify_iteration(r, trace.get(i + 1), seen, ctx));
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub passed: usize,
    pub failed: usize,
    pub not_applicable: usize,
    pub missing_input: usize,
}

impl Tally {
    pub fn evaluated(&self) -> usize {
        self.passed + self.failed
    }

    /// Fraction passed among evaluated checks; 1 when none were evaluated.
    pub fn pass_rate(&self) -> f64 {
        if self.evaluated() == 0 {
            1.0
        } else {
            self.passed as f64 / self.evaluated() as f64
        }
    }
}

pub fn tally(checks: &[Check]) -> BTreeMap<&'static str, Tally> {
    let mut out: BTreeMap<&'static str, Tally> = BTreeMap::new();
    for c in checks {
        let t = out.entry(c.name).or_default();
        match c.status {
            CheckStatus::Passed => t.passed += 1,
            CheckStatus::Failed => t.failed += 1,
            CheckStatus::NotApplicable => t.not_applicable += 1,
            CheckStatus::MissingInput => t.missing_input += 1,
        }
    }
    out
}

/// Theory-only constants of the complexity bounds. Never used by the
/// solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityBudget {
    /// Smallest radius (trust region) or largest σ (cubic) the analysis allows.
    pub region_bound: f64,
    /// Bound on successful iterations.
    pub successful: f64,
    /// Per-method constants: `(κ₁, κ₂, κ₃)` or `(κ₄, σ_max1, σ_max2)`.
    pub constants: [f64; 3],
}

/// `Δ_min = min{κ₁(ε_∇f−ε_g), κ₂(ε_H−ε_B)}` and the successful-iteration
/// bound `κ₃ max{(ε_∇f−ε_g)⁻², (ε_H−ε_B)⁻³}`, given `f(x₀) − f_low`.
pub fn str_budget(ctx: &CertifyContext, f_gap: f64) -> Option<ComplexityBudget> {
    let kh = ctx.constants.kappa_hess?;
    let lh = ctx.constants.lipschitz_hessian?;
    let a = 1.0 - ctx.eta;
    let kappa1 = ctx.r1 * (1.0 / kh).min(a / 40.0).min((a / (12.0 * lh)).sqrt());
    let kappa2 = ctx.r1 * a / (6.0 * lh);
    let mg = ctx.eps_grad - ctx.eps_g;
    let mh = ctx.eps_hess - ctx.eps_b;
    let kappa3 = 2.0 * f_gap * (1.0 / (ctx.eta * kappa1)).max(1.0 / (ctx.eta * kappa2 * kappa2));
    Some(ComplexityBudget {
        region_bound: (kappa1 * mg).min(kappa2 * mh),
        successful: kappa3 * mg.powi(-2).max(mh.powi(-3)),
        constants: [kappa1, kappa2, kappa3],
    })
}

/// Unsuccessful-iteration bound `(log(Δ_max/Δ_min) − T log r₂)/(−log r₁)`
/// after `T` successful iterations, floored at zero.
pub fn str_unsuccessful_bound(ctx: &CertifyContext, delta_max: f64, delta_min: f64, successful: f64) -> f64 {
    (((delta_max / delta_min).ln() - successful * ctx.r2.ln()) / -ctx.r1.ln()).max(0.0)
}

/// `σ_max` and the successful-iteration bound
/// `κ₅ max{(ε_∇f−ε_g)⁻², (ε_H−ε_B)⁻³}` with `κ₅ = (f(x₀) − f_low) max{5/(η κ₄^{−1/2}), 6σ_max2/η}`.
pub fn sarc_budget(ctx: &CertifyContext, f_gap: f64) -> Option<ComplexityBudget> {
    let (m1, m2) = sigma_max(ctx)?;
    let mg = ctx.eps_grad - ctx.eps_g;
    let mh = ctx.eps_hess - ctx.eps_b;
    let kappa4 = m1 * mg;
    let kappa5 = f_gap * (5.0 / (ctx.eta * kappa4.powf(-0.5))).max(6.0 * m2 / ctx.eta);
    Some(ComplexityBudget {
        region_bound: m1.max(m2),
        successful: kappa5 * mg.powi(-2).max(mh.powi(-3)),
        constants: [kappa4, m1, m2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::ExactDiagnostics;

    fn record() -> IterationRecord {
        IterationRecord {
            k: 0,
            radius: 1.0,
            rho_tilde: 1.0,
            rho: 1.0,
            success: true,
            size_g: 10,
            size_b: 10,
            size_h: 10,
            step_norm: 1.0,
            sampled_grad_norm: 1.0,
            sampled_lambda_min: 1.0,
            sampled_hess_norm: 1.0,
            h_current: 0.0,
            h_trial: -0.5,
            model_decrease: 0.5,
            method: Some(StepMethod::Cauchy),
            shortcut: false,
            fallback: false,
            conditions_ok: None,
            residuals: None,
            theta: None,
            exact: Some(ExactDiagnostics {
                f: 0.0,
                grad_norm: 1.0,
                lambda_min: 1.0,
                grad_error: 0.0,
                hess_error: 0.0,
                f_trial: Some(-0.5),
            }),
        }
    }

    fn ctx() -> CertifyContext {
        let constants = ProblemConstants {
            lipschitz_hessian: Some(0.0),
            kappa_hess: Some(1.0),
            h1: Some(0.0),
            h2: Some(0.0),
            ..Default::default()
        };
        CertifyContext::for_str(&StrConfig { eps_h: Some(0.0), ..Default::default() }, 10, constants)
    }

    fn find<'a>(checks: &'a [Check], name: &str) -> &'a Check {
        checks.iter().find(|c| c.name == name).unwrap()
    }

    #[test]
    fn exact_one_dimensional_iteration() {
        // f = x²/2 at x = 1: g = 1, B = 1, Δ = 1 → s = −1, decrease ½
        let checks = str_certify_iteration(&record(), &ctx());
        let c = find(&checks, "tr_cauchy_decrease");
        assert_eq!(c.status, CheckStatus::Passed);
        assert_eq!(c.margin, 0.0);
        // h ≡ f, ε_h = 0: ρ̃ equals the exact ratio
        let c = find(&checks, "ratio_sandwich");
        assert_eq!(c.status, CheckStatus::Passed);
        assert_eq!(c.margin, 0.0);
        // full sample: the indicator terms vanish and the gap is zero
        assert_eq!(find(&checks, "tr_model_gap").status, CheckStatus::Passed);
        assert_eq!(find(&checks, "tr_eigen_decrease").status, CheckStatus::NotApplicable);
    }

    #[test]
    fn violations_are_reported() {
        let mut r = record();
        r.model_decrease = 0.1;
        let checks = str_certify_iteration(&r, &ctx());
        let c = find(&checks, "tr_cauchy_decrease");
        assert_eq!(c.status, CheckStatus::Failed);
        assert!((c.margin + 0.4).abs() < 1e-15);
    }

    #[test]
    fn missing_constants_skip() {
        let mut c = ctx();
        c.constants = ProblemConstants::default();
        let mut r = record();
        r.exact = None;
        let checks = str_certify_iteration(&r, &c);
        assert_eq!(find(&checks, "tr_model_gap").status, CheckStatus::MissingInput);
        assert_eq!(find(&checks, "ratio_sandwich").status, CheckStatus::MissingInput);
        assert_eq!(find(&checks, "lemma_gradient_decrease").status, CheckStatus::MissingInput);
    }

    #[test]
    fn budgets_are_positive() {
        let mut c = ctx();
        c.constants.lipschitz_hessian = Some(2.0);
        let b = str_budget(&c, 1.0).unwrap();
        assert!(b.region_bound > 0.0 && b.successful > 0.0);
        assert!(str_unsuccessful_bound(&c, 10.0, b.region_bound, 0.0) > 0.0);
        let s = SarcConfig::default();
        let sc = CertifyContext::for_sarc(&s, 10, c.constants);
        let (m1, m2) = sigma_max(&sc).unwrap();
        assert_eq!(m2, 4.5 * s.r2 * 2.0);
        assert!(m1 > 0.0);
        assert!(sarc_budget(&sc, 1.0).unwrap().successful > 0.0);
    }
}
