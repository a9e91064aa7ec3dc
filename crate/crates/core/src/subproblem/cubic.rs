use serde::{Deserialize, Serialize};

use super::secular::{solve_increasing, Secular};
use super::{CubicModel, StepMethod, StepOutcome};
use crate::error::{invalid, Error, Result};
use crate::Vector;

/// Cubic Cauchy point `s = −α g`, `α = 2/(‖B‖ + √(‖B‖² + 4σ‖g‖))`.
///
/// This is the positive root of `σ‖g‖α² + ‖B‖α − 1 = 0`.
pub fn cubic_cauchy_step(model: &CubicModel) -> Result<StepOutcome> {
    let g = &model.base.g;
    let gnorm = g.norm();
    if gnorm == 0.0 {
        return Err(Error::Precondition("cubic Cauchy step needs a nonzero gradient".into()));
    }
    let bn = model.base.hessian_norm();
    let alpha = 2.0 / (bn + (bn * bn + 4.0 * model.sigma * gnorm).sqrt());
    let s = g * -alpha;
    let dec = model.decrease(&s);
    Ok(StepOutcome::plain(s, dec, StepMethod::Cauchy))
}

/// How well a step satisfies the exact-minimizer conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicResiduals {
    /// `gᵀs + sᵀBs + σ‖s‖³`, zero at a stationary point of `p`.
    pub stationarity: f64,
    /// `sᵀBs + σ‖s‖³`, nonnegative at the global minimizer.
    pub curvature: f64,
    /// `‖∇p(s)‖`
    pub grad_norm: f64,
    /// `κ_θ min(1, ‖s‖)‖g‖`
    pub grad_bound: f64,
    /// `1 + ‖g‖‖s‖`, the scale of the stationarity tolerance.
    pub scale: f64,
}

impl CubicResiduals {
    /// Stationarity tolerance, relative to [`CubicResiduals::scale`].
    pub const STATIONARITY_TOL: f64 = 1e-8;
    /// Absolute curvature tolerance.
    pub const CURVATURE_TOL: f64 = 1e-10;

    pub fn ok(&self) -> [bool; 3] {
        [
            self.stationarity.abs() <= Self::STATIONARITY_TOL * self.scale,
            self.curvature >= -Self::CURVATURE_TOL,
            self.grad_norm <= self.grad_bound || self.grad_norm <= 1e-12 * self.scale,
        ]
    }
}

pub fn cubic_residuals(model: &CubicModel, s: &Vector, kappa_theta: f64) -> CubicResiduals {
    let g = &model.base.g;
    let bs = &model.base.b * s;
    let sn = s.norm();
    let gs = g.dot(s);
    let sbs = s.dot(&bs);
    let cube = model.sigma * sn.powi(3);
    let grad = g + bs + s * (model.sigma * sn);
    CubicResiduals {
        stationarity: gs + sbs + cube,
        curvature: sbs + cube,
        grad_norm: grad.norm(),
        grad_bound: kappa_theta * sn.min(1.0) * g.norm(),
        scale: 1.0 + g.norm() * sn,
    }
}

fn annotate(model: &CubicModel, mut out: StepOutcome, kappa_theta: f64) -> StepOutcome {
    let r = cubic_residuals(model, &out.s, kappa_theta);
    let gnorm = model.base.g.norm();
    out.theta = (gnorm > 0.0).then(|| r.grad_norm / gnorm);
    out.conditions_ok = Some(r.ok());
    out.residuals = Some(r);
    out
}

/// Global minimizer of the cubic model.
///
/// Solves `(B + λI)s = −g`, `λ = σ‖s‖`, `B + λI ⪰ 0` through the secular
/// equation in the shifted variable, with the hard case handled by
/// eigenvector augmentation. The returned outcome carries the residuals of
/// the stationarity, curvature and gradient conditions and the achieved
/// `θ = ‖∇p(s)‖/‖g‖`. A failed root search returns the Cauchy point with
/// `fallback` set.
pub fn cubic_exact_step(model: &CubicModel, kappa_theta: f64) -> Result<StepOutcome> {
    if !(kappa_theta > 0.0) || !kappa_theta.is_finite() {
        return Err(invalid(format!("kappa_theta must be positive (got {kappa_theta})")));
    }
    let base = &model.base;
    let sigma = model.sigma;
    let spec = base.spectrum();
    let sec = Secular::new(spec, &base.g);
    let gnorm = base.g.norm();
    let l1 = sec.lambda1;
    let scale = spec.norm().max(1.0);
    let k = sec.bottom_multiplicity(1e-12 * scale);

    let exact = |s: Vector| {
        let dec = model.decrease(&s);
        annotate(model, StepOutcome::plain(s, dec, StepMethod::Exact), kappa_theta)
    };

    // hard case: λ = −λ_1, ‖s‖ = −λ_1/σ
    if l1 < 0.0 && sec.gamma_head_norm(k) <= 1e-12 * gnorm {
        let target = -l1 / sigma;
        let (rest, _) = sec.norm(0.0, k);
        if rest <= target {
            let mut s = sec.step(0.0, k);
            let tau = (target * target - rest * rest).max(0.0).sqrt();
            let v = sec.eigvec(0);
            let sign = if base.g.dot(&v) > 0.0 { -1.0 } else { 1.0 };
            s.axpy(sign * tau, &v, 1.0);
            return Ok(exact(s));
        }
    }
    if gnorm == 0.0 {
        return Ok(exact(Vector::zeros(base.dim())));
    }

    let lo = l1.max(0.0);
    let phi = |mu: f64| {
        let (n, d3) = sec.norm(mu, 0);
        let lam = mu - l1;
        (1.0 / n - sigma / lam, d3 / (n * n * n) + sigma / (lam * lam))
    };
    let hi = 0.5 * (l1 + (l1 * l1 + 4.0 * sigma * gnorm).sqrt());
    let hi = hi.max(lo + 1e-12 * scale);
    match solve_increasing(phi, lo, hi, 0.0) {
        Some(mu) => Ok(exact(sec.step(mu, 0))),
        None => {
            let mut c = annotate(model, cubic_cauchy_step(model)?, kappa_theta);
            c.fallback = true;
            Ok(c)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::model;
    use super::super::QuadraticModel;
    use super::*;
    use crate::rng::SeedPath;
    use crate::Matrix;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn cubic(g: &[f64], b: &[f64], sigma: f64) -> CubicModel {
        CubicModel::new(model(g, b), sigma).unwrap()
    }

    #[test]
    fn cauchy_examples() {
        let p = cubic(&[1.0, 0.0], &[0.0; 4], 1.0);
        let c = cubic_cauchy_step(&p).unwrap();
        assert_relative_eq!(c.s[0], -1.0, epsilon = 1e-15);
        assert_relative_eq!(c.model_decrease, 2.0 / 3.0, epsilon = 1e-15);

        let p = cubic(&[4.0], &[0.0], 1.0);
        let c = cubic_cauchy_step(&p).unwrap();
        assert_relative_eq!(c.s[0], -2.0, epsilon = 1e-15);
        assert_relative_eq!(c.model_decrease, 16.0 / 3.0, epsilon = 1e-14);

        // ‖B‖ = 1, ‖g‖ = 1, σ = 2: α = 2/(1 + 3)
        let p = cubic(&[1.0], &[1.0], 2.0);
        let c = cubic_cauchy_step(&p).unwrap();
        assert_relative_eq!(c.s[0], -0.5, epsilon = 1e-15);

        assert!(cubic_cauchy_step(&cubic(&[0.0], &[1.0], 1.0)).is_err());
    }

    #[test]
    fn cauchy_bounds_hold() {
        let root = SeedPath::new(3);
        for t in 0..200 {
            let mut rng = root.child(t).rng();
            let d = 1 + (t as usize % 5);
            let a = Matrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let b = (&a + a.transpose()) * 0.5;
            let g = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let sigma = 0.01 + 10.0 * rng.random::<f64>();
            let p = CubicModel::new(QuadraticModel::new(0.0, g.clone(), b).unwrap(), sigma).unwrap();
            let c = cubic_cauchy_step(&p).unwrap();
            let gn = g.norm();
            let bn = p.base.hessian_norm();
            let bound = 0.1 * gn * (gn / bn).min((gn / sigma).sqrt());
            assert!(c.model_decrease >= bound * (1.0 - 1e-12));
            assert!(c.s.norm() <= 2.75 * (bn / sigma).max((gn / sigma).sqrt()) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn exact_one_dimensional() {
        // g = 0, B = −1, σ = 1: ‖s‖ = 1
        let p = cubic(&[0.0], &[-1.0], 1.0);
        let e = cubic_exact_step(&p, 0.5).unwrap();
        assert_relative_eq!(e.s[0].abs(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(e.model_decrease, 1.0 / 6.0, epsilon = 1e-14);

        let p = cubic(&[0.0, 0.0], &[1.0, 0.0, 0.0, -2.0], 1.0);
        let e = cubic_exact_step(&p, 0.5).unwrap();
        assert_relative_eq!(e.s[1].abs(), 2.0, epsilon = 1e-14);
        assert_relative_eq!(e.s[0], 0.0, epsilon = 1e-15);
        assert_eq!(e.conditions_ok, Some([true; 3]));

        // g = 1, B = 0, σ = 1: s = −1
        let p = cubic(&[1.0], &[0.0], 1.0);
        let e = cubic_exact_step(&p, 0.5).unwrap();
        assert_relative_eq!(e.s[0], -1.0, epsilon = 1e-13);
        assert_eq!(e.conditions_ok, Some([true; 3]));

        // g = 0, B ⪰ 0: the origin
        let p = cubic(&[0.0, 0.0], &[1.0, 0.0, 0.0, 2.0], 1.0);
        assert_eq!(cubic_exact_step(&p, 0.5).unwrap().s.norm(), 0.0);
    }

    #[test]
    fn exact_satisfies_conditions_on_random_instances() {
        let root = SeedPath::new(11);
        for t in 0..300 {
            let mut rng = root.child(t).rng();
            let d = 1 + (t as usize % 6);
            let a = Matrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let b = (&a + a.transpose()) * 0.5;
            let g = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let sigma = 0.05 + 5.0 * rng.random::<f64>();
            let p = CubicModel::new(QuadraticModel::new(0.0, g, b).unwrap(), sigma).unwrap();
            let e = cubic_exact_step(&p, 0.5).unwrap();
            assert!(!e.fallback);
            assert_eq!(e.conditions_ok, Some([true; 3]), "instance {t}: {:?}", e.residuals);
            let c = cubic_cauchy_step(&p).unwrap();
            assert!(e.model_decrease >= c.model_decrease - 1e-9);
            assert!(e.model_decrease >= sigma / 6.0 * e.s.norm().powi(3) * (1.0 - 1e-8) - 1e-12);
        }
    }

    #[test]
    fn hard_case_with_orthogonal_gradient() {
        let p = cubic(&[0.5, 0.0], &[2.0, 0.0, 0.0, -1.0], 1.0);
        let e = cubic_exact_step(&p, 0.5).unwrap();
        // λ = 1 → ‖s‖ = 1, s_1 = −0.5/3
        assert_relative_eq!(e.s[0], -0.5 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(e.s.norm(), 1.0, epsilon = 1e-14);
        assert_eq!(e.conditions_ok, Some([true; 3]));
    }
}
