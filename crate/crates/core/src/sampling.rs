//! Uniform subsampling of the components.
//!
//! Sample sets are drawn without replacement. Sizes come either from the
//! Bernstein-type bounds
//!
//! ```text
//! |S_g| ≥ 16 log(2d/δ) κ_∇f² / ε_g²
//! |S_B| ≥ 16 log(2d/δ) κ_H²  / ε_B²
//! |S_h| ≥ 16 log(2d/δ) κ_f²  / (ε_h² ‖s‖⁴),  and  |S_h| ≥ max(H₁/ε_g, H₂/ε_B)
//! ```
//!
//! or from a batch schedule ([`SamplingPolicy`]). Every size is ceiled and
//! clamped to `[1, n]`.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::problem::{Evaluation, FiniteSumProblem, Quantity};
use crate::rng::SeedPath;
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Function,
    Gradient,
    Hessian,
}

impl SampleKind {
    pub fn quantity(self) -> Quantity {
        match self {
            SampleKind::Function => Quantity::Value,
            SampleKind::Gradient => Quantity::Gradient,
            SampleKind::Hessian => Quantity::Hessian,
        }
    }

    /// Label used when deriving the RNG stream of a draw.
    pub fn stream_label(self) -> u64 {
        match self {
            SampleKind::Function => 0,
            SampleKind::Gradient => 1,
            SampleKind::Hessian => 2,
        }
    }
}

/// A sorted set of distinct component indices (0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    indices: Vec<usize>,
    kind: SampleKind,
    seed_path: SeedPath,
}

impl SampleSet {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn kind(&self) -> SampleKind {
        self.kind
    }

    pub fn seed_path(&self) -> &SeedPath {
        &self.seed_path
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Same indices, used for a different quantity (the `S_h = S_g` shortcut).
    pub fn reuse_as(&self, kind: SampleKind) -> SampleSet {
        SampleSet { indices: self.indices.clone(), kind, seed_path: self.seed_path.clone() }
    }
}

/// Sample sizes of one iteration together with the tolerances that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub size_g: usize,
    pub size_b: usize,
    pub size_h: usize,
    pub delta: f64,
    pub eps_g: f64,
    pub eps_b: f64,
    pub eps_h: f64,
}

fn check_common(eps: f64, delta: f64, d: usize, n: usize, what: &str) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid(format!("{what} must be positive and finite (got {eps})")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1) (got {delta})")));
    }
    if d == 0 || n == 0 {
        return Err(invalid("d and n must be positive"));
    }
    Ok(())
}

fn clamp_size(raw: f64, n: usize) -> usize {
    if raw.is_nan() || raw >= n as f64 {
        return n;
    }
    (raw.ceil() as usize).clamp(1, n)
}

/// Bernstein bound `16 log(2d/δ) κ²/ε²` before ceiling and clamping.
pub fn bernstein_raw(kappa: f64, eps: f64, delta: f64, d: usize) -> f64 {
    16.0 * (2.0 * d as f64 / delta).ln() * kappa * kappa / (eps * eps)
}

/// Gradient sample size; `kappa_grad` bounds every `‖∇f_i‖` on the domain.
pub fn gradient_sample_size(kappa_grad: f64, eps_g: f64, delta: f64, d: usize, n: usize) -> Result<usize> {
    check_common(eps_g, delta, d, n, "eps_g")?;
    if !(kappa_grad >= 0.0) {
        return Err(invalid("kappa_grad must be nonnegative"));
    }
    Ok(clamp_size(bernstein_raw(kappa_grad, eps_g, delta, d), n))
}

/// Hessian sample size; `kappa_hess` bounds every `‖∇²f_i‖` on the domain.
pub fn hessian_sample_size(kappa_hess: f64, eps_b: f64, delta: f64, d: usize, n: usize) -> Result<usize> {
    check_common(eps_b, delta, d, n, "eps_B")?;
    if !(kappa_hess >= 0.0) {
        return Err(invalid("kappa_hess must be nonnegative"));
    }
    Ok(clamp_size(bernstein_raw(kappa_hess, eps_b, delta, d), n))
}

/// Function-value sample size: the larger of the Bernstein bound scaled by
/// `‖s‖⁻⁴` and the variance rule `max(H₁/ε_g, H₂/ε_B)`.
#[allow(clippy::too_many_arguments)]
pub fn function_sample_size(
    kappa_f: f64,
    eps_h: f64,
    step_norm: f64,
    delta: f64,
    d: usize,
    n: usize,
    h1: f64,
    h2: f64,
    eps_g: f64,
    eps_b: f64,
) -> Result<usize> {
    check_common(eps_h, delta, d, n, "eps_h")?;
    if !(step_norm > 0.0) {
        return Err(invalid("step_norm must be positive; zero steps are handled before sampling"));
    }
    if !(kappa_f >= 0.0 && h1 >= 0.0 && h2 >= 0.0) {
        return Err(invalid("kappa_f, H1, H2 must be nonnegative"));
    }
    let ratio = |h: f64, eps: f64, name: &str| -> Result<f64> {
        if h == 0.0 {
            Ok(0.0)
        } else if eps > 0.0 {
            Ok(h / eps)
        } else {
            Err(invalid(format!("{name} must be positive when the matching variance bound is")))
        }
    };
    let bern = bernstein_raw(kappa_f, eps_h, delta, d) / step_norm.powi(4);
    let raw = bern.max(ratio(h1, eps_g, "eps_g")?).max(ratio(h2, eps_b, "eps_B")?);
    Ok(clamp_size(raw, n))
}

/// Uniform subset of `size` distinct indices from `0..n`, sorted.
///
/// `size == n` returns the full range without touching the stream.
pub fn draw_subset(n: usize, size: usize, kind: SampleKind, stream: &SeedPath) -> Result<SampleSet> {
    if size == 0 || size > n {
        return Err(invalid(format!("sample size {size} outside [1, {n}]")));
    }
    let indices = if size == n {
        (0..n).collect()
    } else {
        let mut rng = stream.rng();
        let mut v = index::sample(&mut rng, n, size).into_vec();
        v.sort_unstable();
        v
    };
    Ok(SampleSet { indices, kind, seed_path: stream.clone() })
}

/// Subsampled estimate: the plain average of `f_i`, `∇f_i` or `∇²f_i` over the set.
pub fn estimate(problem: &FiniteSumProblem, x: &Vector, set: &SampleSet) -> Result<Evaluation> {
    if let Some(&bad) = set.indices.iter().find(|&&i| i >= problem.n()) {
        return Err(invalid(format!("index {bad} out of range for n = {}", problem.n())));
    }
    problem.average(x, set.indices.iter().copied(), set.kind.quantity())
}

pub fn estimate_value(problem: &FiniteSumProblem, x: &Vector, set: &SampleSet) -> Result<f64> {
    match estimate(problem, x, &set.reuse_as(SampleKind::Function))? {
        Evaluation::Value(v) => Ok(v),
        _ => unreachable!(),
    }
}

pub fn estimate_gradient(problem: &FiniteSumProblem, x: &Vector, set: &SampleSet) -> Result<Vector> {
    match estimate(problem, x, &set.reuse_as(SampleKind::Gradient))? {
        Evaluation::Gradient(g) => Ok(g),
        _ => unreachable!(),
    }
}

pub fn estimate_hessian(problem: &FiniteSumProblem, x: &Vector, set: &SampleSet) -> Result<Matrix> {
    match estimate(problem, x, &set.reuse_as(SampleKind::Hessian))? {
        Evaluation::Hessian(h) => Ok(h),
        _ => unreachable!(),
    }
}

fn mean_square(vectors: &[Vector]) -> f64 {
    vectors.iter().map(|v| v.norm_squared()).sum::<f64>() / vectors.len() as f64
}

fn check_zero_sum(vectors: &[Vector]) -> Result<()> {
    let first = vectors.first().ok_or_else(|| invalid("need at least one vector"))?;
    let d = first.len();
    if let Some(v) = vectors.iter().find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: v.len() });
    }
    let sum = vectors.iter().fold(Vector::zeros(d), |acc, v| acc + v);
    let scale = vectors.iter().map(|v| v.norm()).sum::<f64>().max(1.0);
    if sum.norm() > 1e-10 * scale {
        return Err(Error::Precondition(format!("vectors must sum to zero (‖Σv‖ = {:e})", sum.norm())));
    }
    Ok(())
}

/// Exact `E‖(1/A) Σ_{b∈𝒜} v_b‖²` over uniform subsets `𝒜` of size `A`, for
/// zero-sum `v`:
///
/// ```text
/// (n − A) / (A (n − 1)) · (1/n) Σ ‖v_i‖²
/// ```
pub fn subset_variance_exact(vectors: &[Vector], subset_size: usize) -> Result<f64> {
    check_zero_sum(vectors)?;
    let n = vectors.len();
    if subset_size == 0 || subset_size > n {
        return Err(invalid(format!("subset size {subset_size} outside [1, {n}]")));
    }
    if subset_size == n {
        return Ok(0.0);
    }
    let (n, a) = (n as f64, subset_size as f64);
    Ok((n - a) / (a * (n - 1.0)) * mean_square(vectors))
}

/// The looser bound `𝟙(A < n)/A · (1/n) Σ ‖v_i‖²`.
pub fn subset_variance_bound(vectors: &[Vector], subset_size: usize) -> Result<f64> {
    check_zero_sum(vectors)?;
    if subset_size == 0 || subset_size > vectors.len() {
        return Err(invalid("subset size outside [1, n]"));
    }
    if subset_size == vectors.len() {
        return Ok(0.0);
    }
    Ok(mean_square(vectors) / subset_size as f64)
}

/// How sample sizes are chosen at each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplingPolicy {
    /// Sizes from the concentration bounds and the `H₁/ε_g`, `H₂/ε_B` rule.
    #[default]
    Bernstein,
    /// One batch size for gradient, Hessian and function estimates.
    Fixed { batch: usize },
    /// `start · factor^⌊k/period⌋`, capped at `n`.
    Growing { start: usize, factor: f64, period: usize },
    /// Exact gradient and function values, subsampled Hessian.
    FullGradient { hessian_batch: usize },
}

/// Everything the Bernstein policy needs besides the iteration number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizingContext {
    pub n: usize,
    pub d: usize,
    pub delta: f64,
    pub eps_g: f64,
    pub eps_b: f64,
    pub eps_h: f64,
    pub kappa_f: Option<f64>,
    pub kappa_grad: Option<f64>,
    pub kappa_hess: Option<f64>,
    pub h1: f64,
    pub h2: f64,
}

fn need(v: Option<f64>, name: &str) -> Result<f64> {
    v.ok_or_else(|| invalid(format!("Bernstein sampling needs {name}")))
}

impl SamplingPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SamplingPolicy::Bernstein => Ok(()),
            SamplingPolicy::Fixed { batch } | SamplingPolicy::FullGradient { hessian_batch: batch } => {
                if batch == 0 {
                    Err(invalid("batch size must be positive"))
                } else {
                    Ok(())
                }
            }
            SamplingPolicy::Growing { start, factor, period } => {
                if start == 0 || period == 0 || !(factor >= 1.0) {
                    Err(invalid("growing schedule needs start >= 1, period >= 1, factor >= 1"))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn growing_batch(start: usize, factor: f64, period: usize, k: usize, n: usize) -> usize {
        let size = start as f64 * factor.powi((k / period) as i32);
        clamp_size(size, n)
    }

    /// `(|S_g|, |S_B|)` at iteration `k`.
    pub fn gradient_hessian_sizes(&self, k: usize, ctx: &SizingContext) -> Result<(usize, usize)> {
        let n = ctx.n;
        Ok(match *self {
            SamplingPolicy::Bernstein => (
                gradient_sample_size(need(ctx.kappa_grad, "kappa_grad")?, ctx.eps_g, ctx.delta, ctx.d, n)?,
                hessian_sample_size(need(ctx.kappa_hess, "kappa_hess")?, ctx.eps_b, ctx.delta, ctx.d, n)?,
            ),
            SamplingPolicy::Fixed { batch } => (batch.min(n), batch.min(n)),
            SamplingPolicy::Growing { start, factor, period } => {
                let b = Self::growing_batch(start, factor, period, k, n);
                (b, b)
            }
            SamplingPolicy::FullGradient { hessian_batch } => (n, hessian_batch.min(n)),
        })
    }

    /// `|S_h|` at iteration `k` once the step length is known.
    pub fn function_size(&self, k: usize, ctx: &SizingContext, step_norm: f64) -> Result<usize> {
        let n = ctx.n;
        Ok(match *self {
            SamplingPolicy::Bernstein => function_sample_size(
                need(ctx.kappa_f, "kappa_f")?,
                ctx.eps_h,
                step_norm,
                ctx.delta,
                ctx.d,
                n,
                ctx.h1,
                ctx.h2,
                ctx.eps_g,
                ctx.eps_b,
            )?,
            SamplingPolicy::Fixed { batch } => batch.min(n),
            SamplingPolicy::Growing { start, factor, period } => Self::growing_batch(start, factor, period, k, n),
            SamplingPolicy::FullGradient { .. } => n,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::make_indefinite_quadratic;
    use approx::assert_relative_eq;

    fn scalars(v: &[f64]) -> Vec<Vector> {
        v.iter().map(|&x| Vector::from_element(1, x)).collect()
    }

    #[test]
    fn gradient_size_matches_hand_value() {
        // 16 log 8 = 33.27
        assert_eq!(gradient_sample_size(1.0, 1.0, 0.5, 2, 1_000_000).unwrap(), 34);
        assert_eq!(hessian_sample_size(1.0, 1.0, 0.5, 2, 1_000_000).unwrap(), 34);
    }

    #[test]
    fn sizes_cap_at_n_and_floor_at_one() {
        assert_eq!(gradient_sample_size(10.0, 1e-3, 0.1, 10, 500).unwrap(), 500);
        let eps = 4.0 * (4.0f64 / 0.5).ln().sqrt() * 1.01;
        assert_eq!(hessian_sample_size(1.0, eps, 0.5, 2, 100).unwrap(), 1);
    }

    #[test]
    fn halving_eps_quadruples_raw_size() {
        let a = bernstein_raw(2.0, 0.4, 0.05, 7);
        let b = bernstein_raw(2.0, 0.2, 0.05, 7);
        assert_relative_eq!(b / a, 4.0, epsilon = 1e-12);
        let c = bernstein_raw(1.0, 1.0, 0.5, 4);
        let e = bernstein_raw(1.0, 1.0, 0.5, 8);
        assert_relative_eq!(e / c, (16.0f64 / 0.5).ln() / (8.0f64 / 0.5).ln(), epsilon = 1e-12);
    }

    #[test]
    fn sizes_are_monotone_in_eps_and_delta() {
        let mut last = usize::MAX;
        for eps in [0.05, 0.1, 0.2, 0.4, 0.8] {
            let s = gradient_sample_size(1.0, eps, 0.1, 5, 100_000).unwrap();
            assert!(s <= last);
            last = s;
        }
        let mut last = usize::MAX;
        for delta in [0.001, 0.01, 0.1, 0.5, 0.9] {
            let s = gradient_sample_size(1.0, 0.1, delta, 5, 100_000).unwrap();
            assert!(s <= last);
            last = s;
        }
    }

    #[test]
    fn zero_eps_is_rejected() {
        assert!(gradient_sample_size(1.0, 0.0, 0.1, 2, 10).is_err());
        assert!(hessian_sample_size(1.0, 0.1, 1.0, 2, 10).is_err());
        assert!(function_sample_size(1.0, 0.1, 0.0, 0.1, 2, 10, 0.0, 0.0, 0.1, 0.1).is_err());
    }

    #[test]
    fn function_size_examples() {
        // 1600 log 200 = 8477.3
        assert_eq!(function_sample_size(1.0, 0.1, 1.0, 0.1, 10, 100_000, 0.0, 0.0, 0.1, 0.1).unwrap(), 8478);
        assert_eq!(function_sample_size(1e-3, 0.1, 1.0, 0.1, 10, 100_000, 500.0, 0.0, 0.1, 0.1).unwrap(), 5000);
        assert_eq!(function_sample_size(1.0, 0.1, 1e4, 0.1, 10, 100_000, 0.0, 0.0, 0.1, 0.1).unwrap(), 1);
    }

    #[test]
    fn full_draw_is_identity_and_draws_are_deterministic() {
        let s = draw_subset(6, 6, SampleKind::Gradient, &SeedPath::new(1)).unwrap();
        assert_eq!(s.indices(), &[0, 1, 2, 3, 4, 5]);
        let p = SeedPath::new(9).child(4);
        let a = draw_subset(10, 3, SampleKind::Hessian, &p).unwrap();
        let b = draw_subset(10, 3, SampleKind::Hessian, &p).unwrap();
        assert_eq!(a, b);
        assert!(a.indices().windows(2).all(|w| w[0] < w[1]));
        assert!(draw_subset(3, 4, SampleKind::Function, &p).is_err());
    }

    #[test]
    fn draws_are_uniform_over_pairs() {
        let mut counts = std::collections::HashMap::new();
        let trials = 100_000;
        let root = SeedPath::new(2024);
        for t in 0..trials {
            let s = draw_subset(5, 2, SampleKind::Gradient, &root.child(t)).unwrap();
            *counts.entry(s.indices().to_vec()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 10);
        for (k, c) in counts {
            let freq = c as f64 / trials as f64;
            assert!((freq - 0.1).abs() <= 0.01, "{k:?}: {freq}");
        }
    }

    #[test]
    fn variance_closed_form_examples() {
        let v = scalars(&[1.0, -2.0, 1.0]);
        assert_relative_eq!(subset_variance_exact(&v, 1).unwrap(), 2.0, epsilon = 1e-15);
        assert_relative_eq!(subset_variance_exact(&v, 2).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(subset_variance_exact(&v, 3).unwrap(), 0.0);
        assert!(subset_variance_exact(&scalars(&[1.0, 1.0]), 1).is_err());
        assert!(subset_variance_bound(&v, 2).unwrap() >= 0.5);
    }

    #[test]
    fn full_estimate_equals_full_evaluation() {
        let p = make_indefinite_quadratic(3, 40, 5, 1.0).unwrap();
        let x = Vector::from_fn(5, |i, _| 0.1 * i as f64 - 0.2);
        let full = draw_subset(40, 40, SampleKind::Gradient, &SeedPath::new(0)).unwrap();
        assert_eq!(estimate_gradient(&p, &x, &full).unwrap(), p.full_gradient(&x).unwrap());
        assert_eq!(estimate_hessian(&p, &x, &full).unwrap(), p.full_hessian(&x).unwrap());
        assert_eq!(estimate_value(&p, &x, &full).unwrap(), p.full_value(&x).unwrap());
    }

    #[test]
    fn growing_schedule_doubles_then_caps() {
        let ctx = SizingContext {
            n: 100,
            d: 2,
            delta: 0.1,
            eps_g: 0.1,
            eps_b: 0.1,
            eps_h: 0.1,
            kappa_f: None,
            kappa_grad: None,
            kappa_hess: None,
            h1: 0.0,
            h2: 0.0,
        };
        let pol = SamplingPolicy::Growing { start: 16, factor: 2.0, period: 10 };
        assert_eq!(pol.gradient_hessian_sizes(0, &ctx).unwrap(), (16, 16));
        assert_eq!(pol.gradient_hessian_sizes(9, &ctx).unwrap(), (16, 16));
        assert_eq!(pol.gradient_hessian_sizes(10, &ctx).unwrap(), (32, 32));
        assert_eq!(pol.gradient_hessian_sizes(30, &ctx).unwrap(), (100, 100));
        let full = SamplingPolicy::FullGradient { hessian_batch: 8 };
        assert_eq!(full.gradient_hessian_sizes(3, &ctx).unwrap(), (100, 8));
        assert_eq!(full.function_size(3, &ctx, 0.5).unwrap(), 100);
        assert!(SamplingPolicy::Bernstein.gradient_hessian_sizes(0, &ctx).is_err());
    }
}
