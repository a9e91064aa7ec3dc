use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use strarc::subproblem::{cubic_cauchy_step, cubic_exact_step, tr_cauchy_step, tr_eigen_step, tr_exact_step, tr_step};
use strarc::{CubicModel, Matrix, QuadraticModel, SeedPath, StepMethod, Vector};

fn random_model(rng: &mut impl Rng, d: usize) -> QuadraticModel {
    let scale: f64 = rng.random_range(0.1..10.0);
    let g = Vector::from_fn(d, |_, _| StandardNormal.sample(&mut *rng)) * rng.random_range(0.01..3.0);
    let a = Matrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut *rng));
    let b = (&a + a.transpose()) * (0.5 * scale / (d as f64).sqrt());
    QuadraticModel::new(0.0, g, b).unwrap()
}

fn instances(seed: u64, count: usize, max_d: usize) -> Vec<QuadraticModel> {
    let mut rng = SeedPath::new(seed).rng();
    (0..count)
        .map(|_| {
            let d = rng.random_range(1..=max_d);
            random_model(&mut rng, d)
        })
        .collect()
}

fn tol(m: &QuadraticModel, r: f64) -> f64 {
    1e-10 * (1.0 + m.g.norm() * r + m.hessian_norm() * r * r)
}

#[test]
fn trust_region_steps_satisfy_the_per_call_bounds() {
    let mut rng = SeedPath::new(1).rng();
    for m in instances(11, 1000, 20) {
        let radius = rng.random_range(0.05..5.0);
        let g = m.g.norm();
        let step = tr_step(&m, radius, false).unwrap().unwrap();
        assert!(step.s.norm() <= radius * (1.0 + 1e-12));
        assert!((step.model_decrease - m.decrease(&step.s)).abs() <= tol(&m, radius));
        let cauchy = 0.5 * g * radius.min(g / m.hessian_norm());
        assert!(step.model_decrease >= cauchy - tol(&m, radius));
        if m.lambda_min() < 0.0 {
            let eigen = -0.5 * m.lambda_min() * radius * radius;
            assert!(step.model_decrease >= eigen - tol(&m, radius));
        }

        let exact = tr_exact_step(&m, radius).unwrap();
        assert!(!exact.fallback);
        assert!(exact.s.norm() <= radius * (1.0 + 1e-9));
        assert!(exact.model_decrease >= step.model_decrease - tol(&m, radius));
    }
}

#[test]
fn eigen_step_scales_with_the_radius() {
    for m in instances(12, 300, 10).into_iter().filter(|m| m.lambda_min() < 0.0) {
        let a = tr_eigen_step(&m, 1.0).unwrap();
        let b = tr_eigen_step(&m, 2.0).unwrap();
        assert!((b.s.norm() - 2.0).abs() < 1e-12);
        assert!(m.g.dot(&b.s) <= 0.0);
        assert!((&b.s - &a.s * 2.0).norm() < 1e-12);
        // linear part doubles, curvature part quadruples
        let lin = -m.g.dot(&a.s);
        assert!((b.model_decrease - (2.0 * lin + 4.0 * (a.model_decrease - lin))).abs() <= tol(&m, 2.0));
    }
}

#[test]
fn cauchy_step_is_a_minimizer_along_the_gradient() {
    for m in instances(13, 300, 8) {
        let c = tr_cauchy_step(&m, 1.5).unwrap();
        let dir = -&m.g / m.g.norm();
        for t in (0..=150).map(|i| i as f64 * 0.01) {
            assert!(m.decrease(&(&dir * t)) <= c.model_decrease + tol(&m, 1.5));
        }
    }
}

/// Brute-force minimum of the model on the disk `‖s‖ ≤ r` for `d = 2`.
fn polar_grid_min(m: &QuadraticModel, r: f64, radial: usize, angular: usize) -> f64 {
    let mut best = 0.0f64;
    for i in 1..=radial {
        let rho = r * i as f64 / radial as f64;
        for j in 0..angular {
            let t = std::f64::consts::TAU * j as f64 / angular as f64;
            best =
                best.min(m.value(&Vector::from_vec(vec![rho * t.cos(), rho * t.sin()])) - m.value(&Vector::zeros(2)));
        }
    }
    best
}

#[test]
fn exact_trust_region_step_matches_a_polar_grid() {
    let mut rng = SeedPath::new(2).rng();
    for _ in 0..60 {
        let m = random_model(&mut rng, 2);
        let r = rng.random_range(0.1..3.0);
        let exact = tr_exact_step(&m, r).unwrap();
        let grid = -polar_grid_min(&m, r, 300, 720);
        // the grid can only approach the true minimum from below
        assert!(exact.model_decrease >= grid - tol(&m, r));
        let h = r / 300.0 + r * std::f64::consts::TAU / 720.0;
        assert!(exact.model_decrease - grid <= (m.g.norm() + m.hessian_norm() * r) * h * h + tol(&m, r));
    }
}

#[test]
fn hard_case_reaches_the_boundary() {
    let b = Matrix::from_diagonal(&Vector::from_vec(vec![-2.0, 1.0, 3.0]));
    let g = Vector::from_vec(vec![0.0, 1.0, 1.0]);
    let m = QuadraticModel::new(0.0, g, b).unwrap();
    let s = tr_exact_step(&m, 2.0).unwrap();
    assert!((s.s.norm() - 2.0).abs() < 1e-9);
    assert!(s.s[0].abs() > 1.0);
}

fn cubic_norm_bound(m: &CubicModel) -> f64 {
    let (b, g, s) = (m.base.hessian_norm(), m.base.g.norm(), m.sigma);
    (b + (b * b + 4.0 * s * g).sqrt()) / (2.0 * s)
}

#[test]
fn exact_cubic_steps_satisfy_the_conditions() {
    let mut rng = SeedPath::new(3).rng();
    for m in instances(14, 1000, 20) {
        let sigma = rng.random_range(0.05..20.0);
        let c = CubicModel::new(m, sigma).unwrap();
        let out = cubic_exact_step(&c, 0.5).unwrap();
        let res = out.residuals.unwrap();
        let [stat, curv, _] = res.ok();
        assert!(stat && curv, "{res:?}");
        let s = out.s.norm();
        assert!(s <= cubic_norm_bound(&c) * (1.0 + 1e-9));
        assert!(out.model_decrease >= sigma / 6.0 * s.powi(3) * (1.0 - 1e-8) - 1e-12);

        let cauchy = cubic_cauchy_step(&c).unwrap();
        assert!(out.model_decrease >= cauchy.model_decrease - 1e-9 * (1.0 + cauchy.model_decrease));
        let g = c.base.g.norm();
        let lower = 0.1 * g * (g / c.base.hessian_norm()).min((g / sigma).sqrt());
        assert!(cauchy.model_decrease >= lower);
        let upper = 2.75 * (c.base.hessian_norm() / sigma).max((g / sigma).sqrt());
        assert!(cauchy.s.norm() <= upper);
        assert_eq!(cauchy.method, StepMethod::Cauchy);
    }
}

#[test]
fn exact_cubic_step_matches_a_grid_in_low_dimension() {
    let mut rng = SeedPath::new(4).rng();
    for d in 1..=3usize {
        let per_axis = [4001, 401, 81][d - 1];
        for _ in 0..10 {
            let c = CubicModel::new(random_model(&mut rng, d), rng.random_range(0.2..5.0)).unwrap();
            let exact = cubic_exact_step(&c, 0.5).unwrap();
            let r = cubic_norm_bound(&c);
            let h = 2.0 * r / (per_axis - 1) as f64;
            let mut best = 0.0f64;
            let mut idx = vec![0usize; d];
            loop {
                let s = Vector::from_fn(d, |i, _| -r + h * idx[i] as f64);
                best = best.max(c.decrease(&s));
                let mut j = 0;
                while j < d {
                    idx[j] += 1;
                    if idx[j] < per_axis {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
                if j == d {
                    break;
                }
            }
            let curvature = c.base.hessian_norm() + 2.0 * c.sigma * r;
            assert!(exact.model_decrease >= best - 1e-9 * (1.0 + best));
            assert!(exact.model_decrease - best <= curvature * d as f64 * h * h, "d = {d}");
        }
    }
}
