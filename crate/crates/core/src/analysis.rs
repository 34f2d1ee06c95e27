//! Closed-form constants and bounds of the convergence theory, the measure `M`,
//! radii of convergence, the IBS error bound and reconstruction error metrics.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::born::Contrast;
use crate::error::{invalid, Error, Result};
use crate::fourier::{norm_lower_bound, project_field};
use crate::grids::{ComplexField, RealField};
use crate::pswf::PswfBasis;

/// `(3√(2π) + 2√(2/3)π) k^{3/2}`, the growth envelope of `μ₀(k)`.
pub fn mu0_envelope(k: f64) -> f64 {
    (3.0 * (2.0 * PI).sqrt() + 2.0 * (2.0f64 / 3.0).sqrt() * PI) * k.powf(1.5)
}

/// `(18√2(3√π + 2π/√3)π)⁻¹`.
pub fn c_r_inf() -> f64 {
    1.0 / (18.0 * 2f64.sqrt() * (3.0 * PI.sqrt() + 2.0 * PI / 3f64.sqrt()) * PI)
}

/// `(72√2(3√π + 2π/√3)π)⁻¹`.
pub fn c_r_2() -> f64 {
    1.0 / (72.0 * 2f64.sqrt() * (3.0 * PI.sqrt() + 2.0 * PI / 3f64.sqrt()) * PI)
}

fn check_k(k: f64) -> Result<()> {
    if !(k > 0.5) || !k.is_finite() {
        return Err(Error::OutOfHypothesis(format!("the bounds need k > 1/2, got {k}")));
    }
    Ok(())
}

/// `a(k) = √(2k+1)/(2k)`, `b(k) = √π(3/(2k^{3/2}) + √(8π/3))k^{1/2}`, `c(k) = k²b(k)`.
pub fn bound_abc(k: f64) -> Result<(f64, f64, f64)> {
    check_k(k)?;
    let a = (2.0 * k + 1.0).sqrt() / (2.0 * k);
    let b = PI.sqrt() * (3.0 / (2.0 * k.powf(1.5)) + (8.0 * PI / 3.0).sqrt()) * k.sqrt();
    Ok((a, b, k * k * b))
}

/// `μ₀(k) = max(1, k b(k), k⁻¹c(k), k²√π a(k))`.
pub fn mu0(k: f64) -> Result<f64> {
    let (a, b, c) = bound_abc(k)?;
    Ok(1f64.max(k * b).max(c / k).max(k * k * PI.sqrt() * a))
}

/// `(μ₀(k), μ₀(ℓk), ν∞ = √2π, μ∞ = √2(μ₀(k) + μ₀(ℓk)))`.
pub fn mu_constants(k: f64, ell: f64) -> Result<(f64, f64, f64, f64)> {
    if !(ell > 1.0) {
        return invalid(format!("ell must exceed 1, got {ell}"));
    }
    let m1 = mu0(k)?;
    let m2 = mu0(ell * k)?;
    Ok((m1, m2, 2f64.sqrt() * PI, 2f64.sqrt() * (m1 + m2)))
}

/// `min(|{γ ≥ ‖γ‖∞/2}|, |{η ≥ ‖η‖∞/2}|)` by cell counting.
pub fn measure_m(gamma: &RealField, eta: &RealField) -> Result<f64> {
    let level_area = |f: &RealField| -> Result<f64> {
        let sup = f.sup_norm();
        if sup == 0.0 || !sup.is_finite() {
            return Err(Error::MeasureUndefined("field vanishes identically".into()));
        }
        let grid = f.grid();
        let mask = grid.mask();
        let count = f
            .values()
            .iter()
            .zip(&mask)
            .filter(|(v, inside)| **inside && **v >= 0.5 * sup)
            .count();
        Ok(count as f64 * grid.cell_area())
    };
    Ok(level_area(gamma)?.min(level_area(eta)?))
}

/// `r = (2μ(√(16C²+1) + 4C))⁻¹` with `C = max(2, ν‖K₁†‖)`.
pub fn radius(mu: f64, nu: f64, k1dag_norm: f64) -> Result<f64> {
    if !(mu > 0.0 && nu > 0.0 && k1dag_norm > 0.0) {
        return invalid("radius inputs must be positive");
    }
    let c = 2f64.max(nu * k1dag_norm);
    Ok(1.0 / (2.0 * mu * ((16.0 * c * c + 1.0).sqrt() + 4.0 * c)))
}

/// `τ̃ = α̃ ε² (1 − ℓ⁻²)`.
pub fn tau_tilde(alpha_tilde: f64, epsilon: f64, ell: f64) -> f64 {
    alpha_tilde * epsilon * epsilon * (1.0 - 1.0 / (ell * ell))
}

/// `‖K₁†‖ ≤ k / (2τ̃ √min(k, 2))`.
pub fn k1dag_norm_bound(k: f64, ell: f64, alpha_tilde: f64, epsilon: f64) -> Result<f64> {
    if !(k > 0.0 && ell > 1.0 && alpha_tilde > 0.0 && epsilon > 0.0) {
        return invalid("k, ell - 1, alpha_tilde and epsilon must be positive");
    }
    Ok(k / (2.0 * tau_tilde(alpha_tilde, epsilon, ell) * k.min(2.0).sqrt()))
}

/// `c_{r,2}(1+ℓ^{3/2})⁻¹ k^{-3/2} M^{1/2} min(√2π, d(k) τ̃ M^{1/2})`.
pub fn radius_lower_measure(k: f64, ell: f64, measure: f64, alpha_tilde: f64, epsilon: f64) -> Result<f64> {
    check_k(k)?;
    if !(measure > 0.0) {
        return invalid("measure must be positive");
    }
    let tau = norm_lower_bound(k) * tau_tilde(alpha_tilde, epsilon, ell);
    let sm = measure.sqrt();
    Ok(c_r_2() / (1.0 + ell.powf(1.5)) * k.powf(-1.5) * sm * (2f64.sqrt() * PI).min(tau * sm))
}

/// Why the error bound could not be evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotApplicable {
    /// `C_ratio ≥ 1`.
    RatioNotBelowOne,
    /// `𝓜` exceeds `μ₂⁻¹(1 − √(1 − (1+C_{K₁})⁻¹))`.
    GateViolated,
}

/// Inputs of the IBS error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundInputs {
    pub n: usize,
    pub mu2: f64,
    pub c2: f64,
    pub c_k1: f64,
    pub c_ratio: f64,
    pub script_m: f64,
    /// Absolute spectral cutoff `α`.
    pub alpha: f64,
    pub epsilon: f64,
    pub delta_alpha: f64,
}

/// `μ₂⁻¹(1 − √(1 − (1+C_{K₁})⁻¹))`.
pub fn smallness_threshold(mu2: f64, c_k1: f64) -> f64 {
    (1.0 - (1.0 - 1.0 / (1.0 + c_k1)).sqrt()) / mu2
}

/// `2μ₂(√(16C₂²+1)(1−C_ratio))⁻¹ C_ratio^{N+1}
///  + (1 + (1 − (1−μ₂𝓜)⁻²)C_{K₁})⁻¹ (3^{-1/2}π α⁻¹ ε 𝓜 + δ_α)`.
pub fn error_bound(x: &ErrorBoundInputs) -> std::result::Result<f64, NotApplicable> {
    if !(x.c_ratio < 1.0) {
        return Err(NotApplicable::RatioNotBelowOne);
    }
    if !(x.script_m <= smallness_threshold(x.mu2, x.c_k1)) || !(x.mu2 * x.script_m < 1.0) {
        return Err(NotApplicable::GateViolated);
    }
    let series = 2.0 * x.mu2 / ((16.0 * x.c2 * x.c2 + 1.0).sqrt() * (1.0 - x.c_ratio))
        * x.c_ratio.powi(x.n as i32 + 1);
    let damp = 1.0 + (1.0 - (1.0 - x.mu2 * x.script_m).powi(-2)) * x.c_k1;
    let floor = PI / 3f64.sqrt() / x.alpha * x.epsilon * x.script_m + x.delta_alpha;
    Ok(series + floor / damp)
}

/// Relative errors of a reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelErrors {
    pub gamma: f64,
    pub eta: f64,
    pub joint: f64,
    /// Set when a truth component vanishes and its error is absolute.
    pub gamma_absolute: bool,
    pub eta_absolute: bool,
}

/// Componentwise and joint `L²(B)` relative errors of real estimates.
pub fn rel_l2_error(truth: (&RealField, &RealField), estimate: (&RealField, &RealField)) -> Result<RelErrors> {
    let g = truth.0.grid();
    if truth.1.grid() != g || estimate.0.grid() != g || estimate.1.grid() != g {
        return invalid("truth and estimate must share a grid");
    }
    let diff = |a: &RealField, b: &RealField| -> f64 {
        let d: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
        RealField::from_values(g, d).expect("masked difference").l2_norm()
    };
    let dg = diff(estimate.0, truth.0);
    let de = diff(estimate.1, truth.1);
    let ng = truth.0.l2_norm();
    let ne = truth.1.l2_norm();
    let nj = ng.hypot(ne);
    Ok(RelErrors {
        gamma: if ng > 0.0 { dg / ng } else { dg },
        eta: if ne > 0.0 { de / ne } else { de },
        joint: if nj > 0.0 { dg.hypot(de) / nj } else { dg.hypot(de) },
        gamma_absolute: ng == 0.0,
        eta_absolute: ne == 0.0,
    })
}

/// `δ_α`: norm of the part of `(γ, η)` orthogonal to the retained span.
pub fn projection_tail(contrast: &Contrast, basis: &PswfBasis) -> Result<f64> {
    let grid = contrast.grid();
    let centers: Vec<[f64; 2]> = (0..grid.len()).map(|i| grid.center_of(i)).collect();
    let raster = basis.evaluate(&centers);
    let tail = |f: &ComplexField| -> Result<f64> {
        let c = project_field(f, basis);
        let mut values = f.values().to_vec();
        for (a, psi) in c.coeffs.iter().zip(&raster) {
            for (v, p) in values.iter_mut().zip(psi) {
                *v -= a * p;
            }
        }
        Ok(ComplexField::masked(grid, values)?.l2_norm())
    };
    Ok(tail(&contrast.gamma)?.hypot(tail(&contrast.eta)?))
}

/// How `𝓜` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptMMode {
    /// `max(‖ψ‖, ‖ψ̃‖)` with the true contrast known.
    Validation,
    /// `‖ψ̃‖` only.
    Blind,
}

/// Inputs of a bounds report beyond `(k, ℓ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsInputs {
    pub k: f64,
    pub ell: f64,
    pub alpha_tilde: f64,
    pub epsilon: f64,
    pub measure: f64,
    /// `|α₀,₀(2k)|`, used for the absolute cutoff `α = α̃|α₀,₀|`.
    pub alpha00: f64,
    /// `‖K₁†φ‖`, when a reconstruction is available.
    pub first_norm: Option<f64>,
    /// `‖ψ‖` (validation) and `‖ψ̃‖`.
    pub truth_norm: Option<f64>,
    pub sum_norm: Option<f64>,
    pub delta_alpha: f64,
    pub n_terms: usize,
}

/// Every constant of the convergence theory for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub k: f64,
    pub ell: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub mu0_k: f64,
    pub mu0_lk: f64,
    pub nu_inf: f64,
    pub mu_inf: f64,
    pub measure: f64,
    pub nu2: f64,
    pub mu2: f64,
    pub d_k: f64,
    pub tau_tilde: f64,
    pub k1dag_norm_bound: f64,
    pub c_k1: f64,
    pub c_big: f64,
    pub radius: f64,
    pub radius_lower_measure: f64,
    pub c_r_inf: f64,
    pub c_r_2: f64,
    pub c_ratio: Option<f64>,
    pub script_m: Option<f64>,
    pub script_m_mode: Option<ScriptMMode>,
    pub smallness_threshold: f64,
    pub gate_satisfied: Option<bool>,
    pub error_bound: Option<f64>,
    pub error_bound_not_applicable: Option<NotApplicable>,
}

pub fn bounds_report(x: &BoundsInputs) -> Result<BoundsReport> {
    let (a, b, c) = bound_abc(x.k)?;
    let (mu0_k, mu0_lk, nu_inf, mu_inf) = mu_constants(x.k, x.ell)?;
    if !(x.measure > 0.0) {
        return Err(Error::MeasureUndefined("measure must be positive".into()));
    }
    let s = 2.0 / x.measure.sqrt();
    let nu2 = s * nu_inf;
    let mu2 = s * mu_inf;
    let k1 = k1dag_norm_bound(x.k, x.ell, x.alpha_tilde, x.epsilon)?;
    let c_k1 = nu2 * k1;
    let c_big = 2f64.max(c_k1);
    let r = radius(mu2, nu2, k1)?;
    let threshold = smallness_threshold(mu2, c_k1);
    let c_ratio = x.first_norm.map(|f| f / r);
    let (script_m, mode) = match (x.truth_norm, x.sum_norm) {
        (Some(t), Some(s)) => (Some(t.max(s)), Some(ScriptMMode::Validation)),
        (Some(t), None) => (Some(t), Some(ScriptMMode::Validation)),
        (None, Some(s)) => (Some(s), Some(ScriptMMode::Blind)),
        (None, None) => (None, None),
    };
    let (bound, na) = match (c_ratio, script_m) {
        (Some(cr), Some(m)) => match error_bound(&ErrorBoundInputs {
            n: x.n_terms,
            mu2,
            c2: c_big,
            c_k1,
            c_ratio: cr,
            script_m: m,
            alpha: x.alpha_tilde * x.alpha00,
            epsilon: x.epsilon,
            delta_alpha: x.delta_alpha,
        }) {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e)),
        },
        _ => (None, None),
    };
    Ok(BoundsReport {
        k: x.k,
        ell: x.ell,
        a,
        b,
        c,
        mu0_k,
        mu0_lk,
        nu_inf,
        mu_inf,
        measure: x.measure,
        nu2,
        mu2,
        d_k: norm_lower_bound(x.k),
        tau_tilde: tau_tilde(x.alpha_tilde, x.epsilon, x.ell),
        k1dag_norm_bound: k1,
        c_k1,
        c_big,
        radius: r,
        radius_lower_measure: radius_lower_measure(x.k, x.ell, x.measure, x.alpha_tilde, x.epsilon)?,
        c_r_inf: c_r_inf(),
        c_r_2: c_r_2(),
        c_ratio,
        script_m,
        script_m_mode: mode,
        smallness_threshold: threshold,
        gate_satisfied: script_m.map(|m| m <= threshold),
        error_bound: bound,
        error_bound_not_applicable: na,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::PixelGrid;

    #[test]
    fn abc_at_five() {
        let (a, b, c) = bound_abc(5.0).unwrap();
        assert!((a - 11f64.sqrt() / 10.0).abs() < 1e-15);
        assert_eq!(c / b, 25.0);
        assert!(matches!(bound_abc(0.5), Err(Error::OutOfHypothesis(_))));
    }

    #[test]
    fn mu0_at_least_one() {
        for k in [0.6, 1.0, 5.0, 15.0] {
            assert!(mu0(k).unwrap() >= 1.0);
        }
        assert!(mu_constants(5.0, 1.0).is_err());
    }

    #[test]
    fn radius_plateau_and_errors() {
        let r = radius(3.0, 1.0, 1e-3).unwrap();
        assert!((r - 1.0 / (6.0 * (65f64.sqrt() + 8.0))).abs() < 1e-15);
        assert!(radius(0.0, 1.0, 1.0).is_err());
        assert!(radius(3.0, 1.0, 10.0).unwrap() < r);
    }

    #[test]
    fn measure_of_constant_fields() {
        let g = PixelGrid::new(64).unwrap();
        let one = RealField::from_fn(g, |_| 1.0);
        let m = measure_m(&one, &one).unwrap();
        let ring = 2.0 * PI * g.spacing() * 2.0;
        assert!((m - PI).abs() < ring);
        assert!(matches!(measure_m(&one, &RealField::zeros(g)), Err(Error::MeasureUndefined(_))));
    }

    #[test]
    fn error_metric_cases() {
        let g = PixelGrid::new(16).unwrap();
        let t = RealField::from_fn(g, |x| 1.0 + x[0]);
        let u = RealField::from_fn(g, |x| x[1] * x[1] + 0.1);
        let same = rel_l2_error((&t, &u), (&t, &u)).unwrap();
        assert_eq!(same.joint, 0.0);
        let zero = RealField::zeros(g);
        let z = rel_l2_error((&t, &u), (&zero, &zero)).unwrap();
        assert!((z.gamma - 1.0).abs() < 1e-14 && (z.eta - 1.0).abs() < 1e-14 && (z.joint - 1.0).abs() < 1e-14);
        let s = rel_l2_error((&t, &u), (&t.scale(1.1), &u.scale(1.1))).unwrap();
        assert!((s.gamma - 0.1).abs() < 1e-12 && (s.joint - 0.1).abs() < 1e-12);
        let abs = rel_l2_error((&zero, &u), (&t, &u)).unwrap();
        assert!(abs.gamma_absolute && !abs.eta_absolute);
    }

    #[test]
    fn error_bound_limits() {
        let base = ErrorBoundInputs {
            n: 4,
            mu2: 10.0,
            c2: 2.0,
            c_k1: 1.0,
            c_ratio: 0.5,
            script_m: 1e-4,
            alpha: 0.5,
            epsilon: 0.1,
            delta_alpha: 0.0,
        };
        let b4 = error_bound(&base).unwrap();
        let b40 = error_bound(&ErrorBoundInputs { n: 40, ..base }).unwrap();
        assert!(b40 < b4);
        let floor = error_bound(&ErrorBoundInputs { n: 400, ..base }).unwrap();
        let damp = 1.0 + (1.0 - (1.0 - 1e-3f64).powi(-2));
        assert!((floor - PI / 3f64.sqrt() / 0.5 * 0.1 * 1e-4 / damp).abs() < 1e-15);
        let no_floor = error_bound(&ErrorBoundInputs { epsilon: 0.0, ..base }).unwrap();
        assert!((no_floor - 2.0 * 10.0 / (65f64.sqrt() * 0.5) * 0.5f64.powi(5)).abs() < 1e-12);
        assert_eq!(error_bound(&ErrorBoundInputs { c_ratio: 1.0, ..base }), Err(NotApplicable::RatioNotBelowOne));
        assert_eq!(error_bound(&ErrorBoundInputs { script_m: 1.0, ..base }), Err(NotApplicable::GateViolated));
    }
}
