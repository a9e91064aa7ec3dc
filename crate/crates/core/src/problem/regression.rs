use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{BoxDomain, Components, FiniteSumProblem, ProblemConstants};
use crate::error::{invalid, Result};
use crate::rng::SeedPath;
use crate::{Matrix, Vector};

/// max |σ(z)(1−σ(z))(1−2σ(z))|, the third derivative of the logistic loss.
const LOGISTIC_THIRD: f64 = 0.096_225_044_864_937_63;
/// max |2t/(1+t²)²|, first derivative of t²/(1+t²).
const REG_FIRST: f64 = 0.649_519_052_838_329;
/// max |(2−6t²)/(1+t²)³|
const REG_SECOND: f64 = 2.0;
/// max |24t(t²−1)/(1+t²)⁴| (4.66856 rounded up)
const REG_THIRD: f64 = 4.6686;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelModel {
    /// `y = ±1` drawn from a logistic teacher.
    Logistic,
    /// `y = sign(aᵀw*)`, linearly separable.
    Separable,
    /// All labels zero; the loss part is the constant `log 2`.
    Zero,
}

/// Logistic loss on synthetic data plus the smooth nonconvex penalty
///
/// ```text
/// f_i(x) = log(1 + exp(−y_i a_iᵀx)) + w Σ_j x_j² / (1 + x_j²)
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionSpec {
    pub n: usize,
    pub d: usize,
    pub reg_weight: f64,
    /// Features are `N(0, feature_scale²/d)` per coordinate, so `‖a_i‖ ≈ feature_scale`.
    pub feature_scale: f64,
    /// Norm scale of the teacher direction used to draw labels.
    pub teacher_scale: f64,
    pub labels: LabelModel,
    pub box_radius: f64,
}

impl Default for RegressionSpec {
    fn default() -> Self {
        Self {
            n: 1000,
            d: 20,
            reg_weight: 0.1,
            feature_scale: 1.0,
            teacher_scale: 3.0,
            labels: LabelModel::Logistic,
            box_radius: 5.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegressionComponents {
    /// One column per sample.
    features: Matrix,
    labels: Vec<f64>,
    reg_weight: f64,
    teacher: Vector,
}

impl RegressionComponents {
    pub fn teacher(&self) -> &Vector {
        &self.teacher
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    fn margin(&self, i: usize, x: &Vector) -> f64 {
        self.labels[i] * self.features.column(i).dot(x)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^{-z})
fn softplus_neg(z: f64) -> f64 {
    (-z).max(0.0) + (-z.abs()).exp().ln_1p()
}

impl Components for RegressionComponents {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn dim(&self) -> usize {
        self.features.nrows()
    }

    fn value(&self, i: usize, x: &Vector) -> f64 {
        let reg: f64 = x.iter().map(|t| t * t / (1.0 + t * t)).sum();
        softplus_neg(self.margin(i, x)) + self.reg_weight * reg
    }

    fn add_gradient(&self, i: usize, x: &Vector, scale: f64, out: &mut Vector) {
        let y = self.labels[i];
        if y != 0.0 {
            let coef = -y * sigmoid(-self.margin(i, x));
            out.axpy(scale * coef, &self.features.column(i), 1.0);
        }
        if self.reg_weight != 0.0 {
            for (o, t) in out.iter_mut().zip(x.iter()) {
                let q = 1.0 + t * t;
                *o += scale * self.reg_weight * 2.0 * t / (q * q);
            }
        }
    }

    fn add_hessian(&self, i: usize, x: &Vector, scale: f64, out: &mut Matrix) {
        let y = self.labels[i];
        if y != 0.0 {
            let s = sigmoid(self.margin(i, x));
            let a = self.features.column(i);
            out.ger(scale * y * y * s * (1.0 - s), &a, &a, 1.0);
        }
        if self.reg_weight != 0.0 {
            for (j, t) in x.iter().enumerate() {
                let q = 1.0 + t * t;
                out[(j, j)] += scale * self.reg_weight * (2.0 - 6.0 * t * t) / (q * q * q);
            }
        }
    }
}

pub fn make_nonconvex_regression(seed: u64, n: usize, d: usize, reg_weight: f64) -> Result<FiniteSumProblem> {
    RegressionSpec { n, d, reg_weight, ..RegressionSpec::default() }.build(seed)
}

impl RegressionSpec {
    pub fn build(&self, seed: u64) -> Result<FiniteSumProblem> {
        let (n, d) = (self.n, self.d);
        if n == 0 || d == 0 {
            return Err(invalid("n and d must be positive"));
        }
        if !(self.reg_weight >= 0.0) {
            return Err(invalid("reg_weight must be nonnegative"));
        }
        if !(self.feature_scale > 0.0 && self.box_radius > 0.0) {
            return Err(invalid("feature_scale and box_radius must be positive"));
        }
        let root = SeedPath::new(seed);
        let mut rng = root.child(0).rng();
        let teacher = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let teacher = teacher.normalize() * self.teacher_scale;

        let mut rng = root.child(1).rng();
        let sd = self.feature_scale / (d as f64).sqrt();
        let features = Matrix::from_fn(d, n, |_, _| rng.sample::<f64, _>(StandardNormal) * sd);

        let mut rng = root.child(2).rng();
        let labels = (0..n)
            .map(|i| {
                let z = features.column(i).dot(&teacher);
                match self.labels {
                    LabelModel::Logistic => {
                        if rng.random::<f64>() < sigmoid(z) {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    LabelModel::Separable => {
                        if z >= 0.0 {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    LabelModel::Zero => 0.0,
                }
            })
            .collect::<Vec<_>>();

        let comps = RegressionComponents { features, labels, reg_weight: self.reg_weight, teacher };
        let constants = self.constants(&comps);
        FiniteSumProblem::new(
            format!("nonconvex_regression(n={n},d={d})"),
            Arc::new(comps),
            constants,
            BoxDomain { radius: self.box_radius },
        )
    }

    fn constants(&self, c: &RegressionComponents) -> ProblemConstants {
        let n = c.labels.len() as f64;
        let d = c.features.nrows() as f64;
        let rho = BoxDomain { radius: self.box_radius }.max_norm(c.features.nrows());
        let w = self.reg_weight;
        let r = self.box_radius;
        let norms: Vec<f64> = (0..c.labels.len()).map(|i| c.features.column(i).norm() * c.labels[i].abs()).collect();
        let max_a = norms.iter().cloned().fold(0.0, f64::max);
        let mean_a2 = norms.iter().map(|a| a * a).sum::<f64>() / n;
        let mean_a4 = norms.iter().map(|a| a.powi(4)).sum::<f64>() / n;
        let mean_a3 = norms.iter().map(|a| a.powi(3)).sum::<f64>() / n;
        let max_loss = softplus_neg(-max_a * rho);

        ProblemConstants {
            lipschitz_hessian: Some(LOGISTIC_THIRD * mean_a3 + w * REG_THIRD),
            lipschitz_gradient: Some(0.25 * mean_a2 + w * REG_SECOND),
            kappa_f: Some(max_loss + w * d * r * r / (1.0 + r * r)),
            kappa_grad: Some(max_a + w * REG_FIRST * d.sqrt()),
            kappa_hess: Some(0.25 * max_a * max_a + w * REG_SECOND),
            // The penalty is identical across components, so only the loss
            // contributes variance; bound it by the second moment.
            h1: Some(mean_a2.sqrt()),
            h2: Some((mean_a4 / 16.0).sqrt()),
        }
    }
}
