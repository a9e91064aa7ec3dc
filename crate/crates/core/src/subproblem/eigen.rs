use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::rng::SeedPath;
use crate::{Matrix, Vector};
use rand::Rng;

/// Dimension above which [`smallest_eigenpair`] switches to Lanczos.
pub const LANCZOS_THRESHOLD: usize = 500;

/// Ascending eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Eigenvalues in ascending order.
    pub values: Vector,
    /// Orthonormal eigenvectors, column `j` for `values[j]`.
    pub vectors: Matrix,
}

impl Spectrum {
    pub fn of(m: &Matrix) -> Spectrum {
        let eig = SymmetricEigen::new(m.clone());
        let d = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = Vector::from_fn(d, |j, _| eig.eigenvalues[order[j]]);
        let vectors = Matrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
        Spectrum { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Spectral norm `max |λ|`.
    pub fn norm(&self) -> f64 {
        self.min().abs().max(self.max().abs())
    }
}

pub(crate) fn asymmetry(m: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn check_symmetric(m: &Matrix, tol: f64) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    let scale = m.amax().max(1.0);
    let asym = asymmetry(m);
    if asym > tol * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Spectral norm. Symmetric input uses the eigenvalues, anything else the
/// largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.is_square() && asymmetry(m) == 0.0 {
        Spectrum::of(m).norm()
    } else {
        m.singular_values().max()
    }
}

/// `(λ_min, v)` with `‖v‖ = 1`.
///
/// Dense symmetric eigendecomposition up to [`LANCZOS_THRESHOLD`], Lanczos
/// with full reorthogonalization beyond.
pub fn smallest_eigenpair(m: &Matrix) -> Result<(f64, Vector)> {
    check_symmetric(m, 1e-12)?;
    if m.nrows() == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    if m.nrows() > LANCZOS_THRESHOLD {
        return lanczos_smallest(m, 1e-9);
    }
    let spec = Spectrum::of(m);
    Ok((spec.values[0], spec.vectors.column(0).into_owned()))
}

/// Lanczos iteration with full reorthogonalization. Stops once the Ritz
/// residual `‖Mv − θv‖` drops below `tol·‖M‖_max`, or the Krylov space fills
/// the whole space.
pub fn lanczos_smallest(m: &Matrix, tol: f64) -> Result<(f64, Vector)> {
    let d = m.nrows();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let mut rng = SeedPath::new(0x4c41_4e43).rng();
    let mut q = Vector::from_fn(d, |_, _| rng.random::<f64>() - 0.5);
    q.normalize_mut();

    let mut basis: Vec<Vector> = Vec::with_capacity(d.min(400));
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut best = (f64::INFINITY, q.clone());

    for k in 0..d {
        basis.push(q.clone());
        let mut w = m * &q;
        let a = q.dot(&w);
        alpha.push(a);
        // two passes of Gram–Schmidt against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w.axpy(-c, b, 1.0);
            }
        }
        let bnorm = w.norm();

        let check = (k + 1) % 10 == 0 || k + 1 == d || bnorm <= 1e-14 * scale;
        if check {
            let kk = alpha.len();
            let t = Matrix::from_fn(kk, kk, |i, j| {
                if i == j {
                    alpha[i]
                } else if i + 1 == j {
                    beta[i]
                } else if j + 1 == i {
                    beta[j]
                } else {
                    0.0
                }
            });
            let spec = Spectrum::of(&t);
            let y = spec.vectors.column(0);
            let mut v = Vector::zeros(d);
            for (coef, b) in y.iter().zip(&basis) {
                v.axpy(*coef, b, 1.0);
            }
            v.normalize_mut();
            let theta = spec.values[0];
            let resid = (m * &v - &v * theta).norm();
            best = (theta, v);
            if resid <= tol * scale * (d as f64).sqrt() || bnorm <= 1e-14 * scale || k + 1 == d {
                return Ok(best);
            }
        }
        if bnorm <= 1e-14 * scale {
            break;
        }
        beta.push(bnorm);
        q = w / bnorm;
    }
    Ok(best)
}
