//! Shared fixtures for the criterion benches.

use strarc::problem::make_nonconvex_regression;
use strarc::{CubicModel, FiniteSumProblem, Matrix, QuadraticModel, SeedPath, Vector};

/// A symmetric indefinite model with a deterministic pseudo-random fill.
pub fn random_model(d: usize, seed: u64) -> QuadraticModel {
    let mut state = SeedPath::new(seed).seed() | 1;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let a = Matrix::from_fn(d, d, |_, _| next());
    let b = (&a + a.transpose()) * 0.5;
    let g = Vector::from_fn(d, |_, _| next());
    QuadraticModel::new(0.0, g, b).expect("finite model")
}

pub fn random_cubic(d: usize, seed: u64, sigma: f64) -> CubicModel {
    CubicModel::new(random_model(d, seed), sigma).expect("positive sigma")
}

pub fn regression(n: usize, d: usize) -> FiniteSumProblem {
    make_nonconvex_regression(11, n, d, 0.1).expect("valid generator")
}
