//! Secular-equation machinery shared by the exact trust-region and cubic
//! solvers.
//!
//! With `B = V diag(λ) Vᵀ` (ascending) and `γ = Vᵀg`, the shifted system
//! `(B + λI) s = −g` reads `s(μ) = −Σ γ_i/(δ_i + μ) v_i` where
//! `δ_i = λ_i − λ_1 ≥ 0` and `μ = λ + λ_1`. Working in `μ` keeps the pole at
//! exactly zero, so near-hard cases do not lose precision to cancellation in
//! `λ + λ_1`.

use super::eigen::Spectrum;
use crate::Vector;

/// Iteration cap for root finding, bracket growth included.
pub(crate) const MAX_ITERS: usize = 200;

pub(crate) struct Secular<'a> {
    spec: &'a Spectrum,
    pub gamma: Vector,
    pub shifted: Vector,
    pub lambda1: f64,
}

impl<'a> Secular<'a> {
    pub fn new(spec: &'a Spectrum, g: &Vector) -> Self {
        let gamma = spec.vectors.tr_mul(g);
        let lambda1 = spec.values[0];
        let shifted = spec.values.map(|l| (l - lambda1).max(0.0));
        Self { spec, gamma, shifted, lambda1 }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    /// Number of leading eigenvalues within `tol` of `λ_1`.
    pub fn bottom_multiplicity(&self, tol: f64) -> usize {
        self.shifted.iter().take_while(|&&d| d <= tol).count()
    }

    /// `‖(γ_0, …, γ_{k−1})‖`
    pub fn gamma_head_norm(&self, k: usize) -> f64 {
        self.gamma.rows(0, k).norm()
    }

    /// `‖s(μ)‖` and `Σ γ_i²/(δ_i+μ)³`, skipping the first `skip` coordinates.
    pub fn norm(&self, mu: f64, skip: usize) -> (f64, f64) {
        let mut n2 = 0.0;
        let mut d3 = 0.0;
        for i in skip..self.dim() {
            let den = self.shifted[i] + mu;
            let t = self.gamma[i] / den;
            n2 += t * t;
            d3 += t * t / den;
        }
        (n2.sqrt(), d3)
    }

    /// `s(μ)` in the original coordinates, skipping the first `skip` modes.
    pub fn step(&self, mu: f64, skip: usize) -> Vector {
        let mut s = Vector::zeros(self.dim());
        for i in skip..self.dim() {
            let den = self.shifted[i] + mu;
            let coef = -self.gamma[i] / den;
            if coef != 0.0 {
                s.axpy(coef, &self.spec.vectors.column(i), 1.0);
            }
        }
        s
    }

    pub fn eigvec(&self, i: usize) -> Vector {
        self.spec.vectors.column(i).into_owned()
    }
}

/// Root of an increasing function on `(lo, ∞)` by safeguarded Newton with
/// bisection. `f` returns `(φ(μ), φ'(μ))`. The returned point has
/// `φ ≥ 0` unless `|φ| ≤ ftol` was reached first. `None` if no sign change
/// was found or the iteration cap was hit before the bracket closed.
pub(crate) fn solve_increasing<F>(mut f: F, lo: f64, hi_guess: f64, ftol: f64) -> Option<f64>
where
    F: FnMut(f64) -> (f64, f64),
{
    let mut a = lo;
    let mut b = hi_guess.max(lo + f64::EPSILON * lo.abs().max(1.0));
    let mut iters = 0;
    let (mut fb, mut dfb) = f(b);
    while !(fb >= 0.0) {
        if fb.is_nan() {
            return None;
        }
        a = b;
        b = lo + 2.0 * (b - lo) + 1.0;
        iters += 1;
        if iters > MAX_ITERS {
            return None;
        }
        (fb, dfb) = f(b);
    }
    if fb.abs() <= ftol {
        return Some(b);
    }

    let mut x = b;
    let (mut fx, mut dfx) = (fb, dfb);
    while iters < MAX_ITERS {
        iters += 1;
        let newton = x - fx / dfx;
        let next = if newton.is_finite() && newton > a && newton < b && dfx > 0.0 { newton } else { 0.5 * (a + b) };
        (fx, dfx) = f(next);
        x = next;
        if fx.is_nan() {
            return None;
        }
        if fx >= 0.0 {
            b = x;
        } else {
            a = x;
        }
        if fx.abs() <= ftol {
            return Some(x);
        }
        if b - a <= 4.0 * f64::EPSILON * b.abs().max(f64::MIN_POSITIVE) {
            return Some(b);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_root_of_simple_function() {
        // φ(μ) = μ² − 2 on (0, ∞)
        let r = solve_increasing(|m| (m * m - 2.0, 2.0 * m), 0.0, 0.1, 1e-15).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn handles_pole_at_lower_end() {
        // φ(μ) = 1 − 1/μ, root at 1, −∞ at 0
        let r = solve_increasing(|m| (1.0 - 1.0 / m, 1.0 / (m * m)), 0.0, 1e-9, 1e-15).unwrap();
        assert!((r - 1.0).abs() < 1e-13);
    }

    #[test]
    fn reports_missing_sign_change() {
        assert!(solve_increasing(|_| (-1.0, 0.0), 0.0, 1.0, 1e-12).is_none());
    }
}
