//! Identity and property checks shared by `hcsck verify` and the test suites.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::test_section;
use crate::error::Result;
use crate::field::{SectionField, Weight};
use crate::moment_maps;
use crate::operators::{self, MetricState};
use crate::surface::SurfaceModel;

/// `|⟨∇¹⁰a, b⟩ − ⟨a, ∇^{1,0*}b⟩| / (‖a‖‖b‖)` for smooth test sections
/// `a` of weight `(k−1, 0)` and `b` of weight `(k, 0)`.
pub fn adjointness_defect(surface: &SurfaceModel, k: i32, seed: u32) -> Result<f64> {
    let m = MetricState::background(surface);
    let a = test_section(surface, Weight(k - 1, 0), seed);
    let b = test_section(surface, Weight(k, 0), seed.wrapping_add(11));
    let lhs = m.l2_inner(&operators::nabla10(&m, &a)?, &b)?;
    let rhs = m.l2_inner(&a, &operators::nabla10_adjoint(&m, &b)?)?;
    Ok((lhs - rhs).norm() / (m.l2_norm(&a)? * m.l2_norm(&b)?))
}

/// A smooth quadratic differential with `max ‖q‖² = amplitude`.
pub fn random_quadratic(surface: &SurfaceModel, seed: u32, amplitude: f64) -> Result<SectionField> {
    let m = MetricState::background(surface);
    let q = test_section(surface, Weight::QUADRATIC, seed);
    let peak = operators::pointwise_norm_sq(&m, &q)?.into_iter().fold(0.0f64, f64::max);
    Ok(q.scaled(Complex64::new((amplitude / peak).sqrt(), 0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectNorms {
    pub sup: f64,
    pub l2: f64,
}

impl DefectNorms {
    pub fn of(m: &MetricState, v: &[f64]) -> Self {
        let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
        let l2 = (m.integrate_real(&sq).max(0.0) / m.area()).sqrt();
        Self { sup: v.iter().fold(0.0f64, |a, x| a.max(x.abs())), l2 }
    }
}

/// Defect of `s(ω) = F s(ω̃) − ½Δ log F` on the background.
pub fn conformal_identity(surface: &SurfaceModel, q: &SectionField) -> Result<DefectNorms> {
    let m = MetricState::background(surface);
    Ok(DefectNorms::of(&m, &moment_maps::conformal_identity_defect(&m, q)?))
}

/// Defect of the divergence identity relating the contracted fields of
/// `ω` and `ω̃`.
pub fn divergence_identity(surface: &SurfaceModel, q: &SectionField, beta: &SectionField) -> Result<DefectNorms> {
    let m = MetricState::background(surface);
    Ok(DefectNorms::of(&m, &moment_maps::divergence_identity_defect(&m, q, beta)?))
}

/// Largest continuity residual at `(τ, β, f, η) = 0`.
pub fn trivial_residual(surface: &SurfaceModel, t: f64) -> Result<f64> {
    let m = MetricState::background(surface);
    let n = surface.len();
    let q = SectionField::zeros(Weight::QUADRATIC, n);
    let beta = SectionField::zeros(Weight::ONE_FORM, n);
    Ok(moment_maps::continuity_residual(&m, &vec![0.0; n], &q, &beta, t)?.norms.sup())
}

/// `log(e_coarse / e_fine) / log(h_coarse / h_fine)`.
pub fn observed_order(e_coarse: f64, e_fine: f64, h_coarse: f64, h_fine: f64) -> f64 {
    (e_coarse / e_fine).ln() / (h_coarse / h_fine).ln()
}
