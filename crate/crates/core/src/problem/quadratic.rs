use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{BoxDomain, Components, FiniteSumProblem, ProblemConstants};
use crate::error::{invalid, Result};
use crate::rng::SeedPath;
use crate::subproblem::spectral_norm;
use crate::{Matrix, Vector};

/// Parameters of the quadratic test family
///
/// ```text
/// f_i(x) = ½ xᵀA_i x + b_iᵀx + (μ/4)‖x‖⁴
/// ```
///
/// The mean Hessian at the origin has eigenvalues evenly spaced on
/// `[eig_lo, eig_hi]`. The quartic term is shared by every component, so it
/// does not add variance; with `μ > 0` and `eig_lo < 0` the origin is a strict
/// saddle and the sum is bounded below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadraticSpec {
    pub n: usize,
    pub d: usize,
    pub eig_lo: f64,
    pub eig_hi: f64,
    /// Scale of the zero-mean symmetric perturbations `A_i − Ā`.
    pub component_noise: f64,
    /// Scale of the linear terms `b_i`.
    pub linear_scale: f64,
    /// Mean of the `b_i`; zero puts a stationary point at the origin.
    pub linear_offset: f64,
    pub quartic_weight: f64,
    pub box_radius: f64,
}

impl Default for QuadraticSpec {
    fn default() -> Self {
        Self {
            n: 100,
            d: 10,
            eig_lo: -1.0,
            eig_hi: 1.0,
            component_noise: 0.5,
            linear_scale: 1.0,
            linear_offset: 0.0,
            quartic_weight: 0.5,
            box_radius: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticComponents {
    a: Vec<Matrix>,
    b: Vec<Vector>,
    quartic: f64,
    d: usize,
}

impl QuadraticComponents {
    pub fn hessians(&self) -> &[Matrix] {
        &self.a
    }

    pub fn linear_terms(&self) -> &[Vector] {
        &self.b
    }

    pub fn quartic_weight(&self) -> f64 {
        self.quartic
    }
}

impl Components for QuadraticComponents {
    fn len(&self) -> usize {
        self.a.len()
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, i: usize, x: &Vector) -> f64 {
        let r2 = x.norm_squared();
        0.5 * x.dot(&(&self.a[i] * x)) + self.b[i].dot(x) + 0.25 * self.quartic * r2 * r2
    }

    fn add_gradient(&self, i: usize, x: &Vector, scale: f64, out: &mut Vector) {
        out.gemv(scale, &self.a[i], x, 1.0);
        out.axpy(scale, &self.b[i], 1.0);
        if self.quartic != 0.0 {
            out.axpy(scale * self.quartic * x.norm_squared(), x, 1.0);
        }
    }

    fn add_hessian(&self, i: usize, x: &Vector, scale: f64, out: &mut Matrix) {
        *out += &self.a[i] * scale;
        if self.quartic != 0.0 {
            // ∇²(‖x‖⁴/4) = ‖x‖² I + 2 x xᵀ
            let c = scale * self.quartic;
            let r2 = x.norm_squared();
            for j in 0..self.d {
                out[(j, j)] += c * r2;
            }
            out.ger(2.0 * c, x, x, 1.0);
        }
    }
}

/// Indefinite quadratic with spectrum `[-spread, spread]`, zero-sum linear
/// terms (so `∇f(0) = 0` exactly) and the default quartic stabiliser.
pub fn make_indefinite_quadratic(seed: u64, n: usize, d: usize, curvature_spread: f64) -> Result<FiniteSumProblem> {
    if d < 2 {
        return Err(invalid("indefinite quadratic needs d >= 2 for both curvature signs"));
    }
    if !(curvature_spread > 0.0) {
        return Err(invalid("curvature_spread must be positive"));
    }
    QuadraticSpec { n, d, eig_lo: -curvature_spread, eig_hi: curvature_spread, ..QuadraticSpec::default() }.build(seed)
}

/// Strongly convex quadratic (no quartic term) with mean spectrum `[lo, hi]`.
pub fn make_convex_quadratic(seed: u64, n: usize, d: usize, lo: f64, hi: f64) -> Result<FiniteSumProblem> {
    if !(lo > 0.0 && hi >= lo) {
        return Err(invalid("convex quadratic needs 0 < lo <= hi"));
    }
    QuadraticSpec { n, d, eig_lo: lo, eig_hi: hi, quartic_weight: 0.0, linear_offset: 1.0, ..QuadraticSpec::default() }
        .build(seed)
}

impl QuadraticSpec {
    pub fn build(&self, seed: u64) -> Result<FiniteSumProblem> {
        let (n, d) = (self.n, self.d);
        if n == 0 || d == 0 {
            return Err(invalid("n and d must be positive"));
        }
        if self.eig_hi < self.eig_lo {
            return Err(invalid("eig_hi must be >= eig_lo"));
        }
        if self.quartic_weight < 0.0 || self.component_noise < 0.0 || self.linear_scale < 0.0 {
            return Err(invalid("scales must be nonnegative"));
        }
        if !(self.box_radius > 0.0) {
            return Err(invalid("box_radius must be positive"));
        }
        let root = SeedPath::new(seed);

        // Mean Hessian Q diag(λ) Qᵀ with a random orthogonal Q.
        let mut rng = root.child(0).rng();
        let gauss = Matrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = gauss.qr().q();
        let eigs = Vector::from_fn(d, |j, _| {
            if d == 1 {
                self.eig_lo
            } else {
                self.eig_lo + (self.eig_hi - self.eig_lo) * j as f64 / (d - 1) as f64
            }
        });
        let mean = &q * Matrix::from_diagonal(&eigs) * q.transpose();
        let mean = (&mean + mean.transpose()) * 0.5;

        // Antithetic pairs (E, −E) and (b, −b) make the perturbations and the
        // linear terms sum to exactly zero; an odd leftover gets zero.
        let mut rng = root.child(1).rng();
        let noise = self.component_noise / (d as f64).sqrt();
        let lin = self.linear_scale / (d as f64).sqrt();
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        let offset = Vector::from_element(d, self.linear_offset / (d as f64).sqrt());
        for pair in 0..n.div_ceil(2) {
            let e = Matrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal) * noise);
            let e = (&e + e.transpose()) * 0.5;
            let v = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal) * lin);
            if 2 * pair + 1 < n {
                a.push(&mean + &e);
                a.push(&mean - &e);
                b.push(&v + &offset);
                b.push(-&v + &offset);
            } else {
                a.push(mean.clone());
                b.push(offset.clone());
            }
        }

        let comps = QuadraticComponents { a, b, quartic: self.quartic_weight, d };
        let constants = self.constants(&comps);
        FiniteSumProblem::new(
            format!("{}_quadratic(n={n},d={d})", if self.eig_lo < 0.0 { "indefinite" } else { "convex" }),
            Arc::new(comps),
            constants,
            BoxDomain { radius: self.box_radius },
        )
    }

    fn constants(&self, c: &QuadraticComponents) -> ProblemConstants {
        let n = c.a.len() as f64;
        let rho = BoxDomain { radius: self.box_radius }.max_norm(c.d);
        let mu = c.quartic;
        let a_norms: Vec<f64> = c.a.iter().map(spectral_norm).collect();
        let b_norms: Vec<f64> = c.b.iter().map(|v| v.norm()).collect();
        let a_mean = c.a.iter().fold(Matrix::zeros(c.d, c.d), |acc, m| acc + m) / n;
        let b_mean = c.b.iter().fold(Vector::zeros(c.d), |acc, v| acc + v) / n;

        let kappa_hess = a_norms.iter().cloned().fold(0.0, f64::max) + 3.0 * mu * rho * rho;
        let kappa_grad =
            a_norms.iter().zip(&b_norms).map(|(an, bn)| an * rho + bn).fold(0.0, f64::max) + mu * rho.powi(3);
        let kappa_f = a_norms.iter().zip(&b_norms).map(|(an, bn)| 0.5 * an * rho * rho + bn * rho).fold(0.0, f64::max)
            + 0.25 * mu * rho.powi(4);

        let mut h2_sq = 0.0;
        let mut h1_sq = 0.0;
        for (ai, bi) in c.a.iter().zip(&c.b) {
            let da = spectral_norm(&(ai - &a_mean));
            let db = (bi - &b_mean).norm();
            h2_sq += da * da;
            h1_sq += (da * rho + db).powi(2);
        }

        ProblemConstants {
            lipschitz_hessian: Some(6.0 * mu * rho),
            lipschitz_gradient: Some(spectral_norm(&a_mean) + 3.0 * mu * rho * rho),
            kappa_f: Some(kappa_f),
            kappa_grad: Some(kappa_grad),
            kappa_hess: Some(kappa_hess),
            h1: Some((h1_sq / n).sqrt()),
            h2: Some((h2_sq / n).sqrt()),
        }
    }
}
