use super::secular::{solve_increasing, Secular};
use super::{QuadraticModel, StepMethod, StepOutcome};
use crate::error::{invalid, Error, Result};

fn check_radius(radius: f64) -> Result<()> {
    if radius > 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("trust-region radius must be positive and finite (got {radius})")))
    }
}

/// Cauchy point: the model minimizer along `−g` inside the ball.
///
/// `s = −τ Δ g/‖g‖`, `τ = 1` if `gᵀBg ≤ 0`, else `min(1, ‖g‖³/(Δ gᵀBg))`.
/// Its decrease is at least `½‖g‖ min{Δ, ‖g‖/‖B‖}`.
pub fn tr_cauchy_step(model: &QuadraticModel, radius: f64) -> Result<StepOutcome> {
    check_radius(radius)?;
    let g = &model.g;
    let gnorm = g.norm();
    if gnorm == 0.0 {
        return Err(Error::Precondition("Cauchy step needs a nonzero gradient; use the eigen step".into()));
    }
    let gbg = g.dot(&(&model.b * g));
    let tau = if gbg <= 0.0 { 1.0 } else { (gnorm.powi(3) / (radius * gbg)).min(1.0) };
    let s = g * (-tau * radius / gnorm);
    let dec = model.decrease(&s);
    Ok(StepOutcome::plain(s, dec, StepMethod::Cauchy))
}

/// Negative-curvature step `±Δ v` along the eigenvector of `λ_min(B)`, signed
/// so that `⟨g, s⟩ ≤ 0` (ties go to `+v`). Decrease is at least
/// `−½ λ_min(B) Δ²`.
pub fn tr_eigen_step(model: &QuadraticModel, radius: f64) -> Result<StepOutcome> {
    check_radius(radius)?;
    let spec = model.spectrum();
    if spec.min() >= 0.0 {
        return Err(Error::Precondition(format!("eigen step needs negative curvature (λ_min = {})", spec.min())));
    }
    let v = spec.vectors.column(0);
    let mut s = v * radius;
    if model.g.dot(&s) > 0.0 {
        s = -s;
    }
    let dec = model.decrease(&s);
    Ok(StepOutcome::plain(s, dec, StepMethod::Eigen))
}

fn best_simple_step(model: &QuadraticModel, radius: f64) -> Result<Option<StepOutcome>> {
    let cauchy = if model.g.norm() > 0.0 { Some(tr_cauchy_step(model, radius)?) } else { None };
    let eigen = if model.lambda_min() < 0.0 { Some(tr_eigen_step(model, radius)?) } else { None };
    Ok(match (cauchy, eigen) {
        (Some(c), Some(e)) => Some(if e.model_decrease > c.model_decrease { e } else { c }),
        (c, e) => c.or(e),
    })
}

/// Global minimizer of the quadratic model on `‖s‖ ≤ Δ`.
///
/// Interior Newton step when `B ≻ 0` and `‖B⁻¹g‖ ≤ Δ`; hard case (gradient
/// orthogonal to the bottom eigenspace) by eigenvector augmentation;
/// otherwise the boundary solution of `‖(B + λI)⁻¹g‖ = Δ`. If the root
/// finder fails, or the result is somehow worse than the Cauchy/eigen
/// steps, the better of those is returned with `fallback` set.
pub fn tr_exact_step(model: &QuadraticModel, radius: f64) -> Result<StepOutcome> {
    check_radius(radius)?;
    let spec = model.spectrum();
    let sec = Secular::new(spec, &model.g);
    let gnorm = model.g.norm();
    let l1 = sec.lambda1;
    let scale = spec.norm().max(1.0);
    let k = sec.bottom_multiplicity(1e-12 * scale);

    let exact = |s: crate::Vector| {
        let dec = model.decrease(&s);
        StepOutcome::plain(s, dec, StepMethod::Exact)
    };

    let candidate = 'solve: {
        // interior: λ = 0, i.e. μ = λ_1
        if l1 > 0.0 {
            let (nrm, _) = sec.norm(l1, 0);
            if nrm <= radius {
                break 'solve Some(exact(sec.step(l1, 0)));
            }
        }
        // hard case at λ = −λ_1 (μ = 0)
        if l1 <= 0.0 && sec.gamma_head_norm(k) <= 1e-12 * gnorm {
            let (rest, _) = sec.norm(0.0, k);
            if rest <= radius {
                let mut s = sec.step(0.0, k);
                if l1 < 0.0 {
                    let tau = (radius * radius - rest * rest).max(0.0).sqrt();
                    let v = sec.eigvec(0);
                    let sign = if model.g.dot(&v) > 0.0 { -1.0 } else { 1.0 };
                    s.axpy(sign * tau, &v, 1.0);
                }
                break 'solve Some(exact(s));
            }
        }
        if gnorm == 0.0 {
            break 'solve None;
        }
        let lo = l1.max(0.0);
        let phi = |mu: f64| {
            let (n, d3) = sec.norm(mu, 0);
            (1.0 / n - 1.0 / radius, d3 / (n * n * n))
        };
        let hi = (gnorm / radius).max(lo + 1e-12 * scale);
        solve_increasing(phi, lo, hi, 1e-15 / radius).map(|mu| {
            let mut s = sec.step(mu, 0);
            let n = s.norm();
            if n > radius {
                s *= radius / n;
            }
            exact(s)
        })
    };

    let simple = best_simple_step(model, radius)?;
    match (candidate, simple) {
        (Some(c), Some(mut s)) => {
            let slack = 1e-12 * (1.0 + s.model_decrease.abs());
            if c.model_decrease + slack >= s.model_decrease {
                Ok(c)
            } else {
                s.fallback = true;
                Ok(s)
            }
        }
        (Some(c), None) => Ok(c),
        (None, Some(mut s)) => {
            s.fallback = true;
            Ok(s)
        }
        (None, None) => Ok(exact(crate::Vector::zeros(model.dim()))),
    }
}
