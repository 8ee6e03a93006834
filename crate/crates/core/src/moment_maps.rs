//! Residuals of the moment-map system in its original, transformed,
//! conformal-potential and continuity-path forms, the conformal change of
//! variables `ω̃ = Fω` and checks relating the forms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HcscError, Result};
use crate::field::{SectionField, Weight};
use crate::operators::{self, MetricState, VectorField};
use crate::par;
use crate::surface::SurfaceModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum SystemForm {
    Original,
    Transformed,
    ConformalPotential,
    Continuity { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub complex_sup: f64,
    pub complex_l2: f64,
    pub real_sup: f64,
    pub real_l2: f64,
}

impl ResidualNorms {
    pub fn sup(&self) -> f64 {
        self.complex_sup.max(self.real_sup)
    }
}

#[derive(Debug, Clone)]
pub struct MomentMapResidual {
    pub form: SystemForm,
    /// `(1,0)` in every form except the original one, where it is `(0,0)`.
    pub complex_mm: SectionField,
    pub real_mm: Vec<f64>,
    /// `1 − max ‖q‖²` in the form's own metric; may be negative.
    pub constraint_margin: f64,
    pub norms: ResidualNorms,
}

impl MomentMapResidual {
    fn new(m: &MetricState, form: SystemForm, complex_mm: SectionField, real_mm: Vec<f64>, constraint_margin: f64) -> Result<Self> {
        let norms = residual_norms(m, &complex_mm, &real_mm)?;
        Ok(Self { form, complex_mm, real_mm, constraint_margin, norms })
    }
}

pub fn residual_norms(m: &MetricState, complex_mm: &SectionField, real_mm: &[f64]) -> Result<ResidualNorms> {
    let cn = operators::pointwise_norm_sq(m, complex_mm)?;
    let sq: Vec<f64> = real_mm.iter().map(|r| r * r).collect();
    Ok(ResidualNorms {
        complex_sup: cn.iter().fold(0.0f64, |a, &b| a.max(b)).sqrt(),
        complex_l2: m.integrate_real(&cn).max(0.0).sqrt(),
        real_sup: real_mm.iter().fold(0.0f64, |a, b| a.max(b.abs())),
        real_l2: m.integrate_real(&sq).max(0.0).sqrt(),
    })
}

fn cr(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `e^{−2f} ‖q‖²_ω`, which equals `‖q‖²` in the metric `e^f ω`.
pub fn constraint_quantity(m: &MetricState, f: &[f64], q: &SectionField) -> Result<Vec<f64>> {
    q.expect_weight(Weight::QUADRATIC)?;
    m.surface.check_len_real(f)?;
    let n = operators::pointwise_norm_sq(m, q)?;
    Ok(n.iter().zip(f).map(|(n, f)| n * (-2.0 * f).exp()).collect())
}

pub fn constraint_margin(m: &MetricState, f: &[f64], q: &SectionField) -> Result<f64> {
    Ok(1.0 - constraint_quantity(m, f, q)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// `2e^{−f}/(1+‖e^{−f}q‖²) ∇^{1,0*}q − tβ` in the metric `m`.
pub fn complex_mm_residual(m: &MetricState, q: &SectionField, f: &[f64], beta: &SectionField, t: f64) -> Result<SectionField> {
    beta.expect_weight(Weight::ONE_FORM)?;
    let a = operators::nabla10_adjoint(m, q)?;
    let p = constraint_quantity(m, f, q)?;
    let values = par::map_indexed(q.len(), |i| 2.0 * (-f[i]).exp() * a.values[i] / (1.0 + p[i]) - t * beta.values[i]);
    Ok(SectionField::new(Weight::ONE_FORM, values))
}

/// Real equation for a conformal potential `f` over the reference `m`:
/// `2s + Δf + (−e^f ŝ + ‖β‖²)(1+‖e^{−f}q‖²) − (g(e^{−f}q̄, ∇¹⁰β − β⊗df) + c.c.)`.
pub fn real_mm_residual_conformal_potential(m: &MetricState, f: &[f64], q: &SectionField, beta: &SectionField, s_hat: f64) -> Result<Vec<f64>> {
    beta.expect_weight(Weight::ONE_FORM)?;
    let p = constraint_quantity(m, f, q)?;
    let s = operators::scalar_curvature(m);
    let lap = operators::laplacian_real(m, f)?;
    let nb = operators::nabla10(m, beta)?;
    let df = operators::d_z(m, &SectionField::from_real(Weight::FUNCTION, f))?;
    Ok(par::map_indexed(f.len(), |i| {
        let g = m.density[i];
        let ef = f[i].exp();
        let b2 = beta.values[i].norm_sqr() / g;
        let cross = q.values[i].conj() * (nb.values[i] - beta.values[i] * df.values[i]) / (ef * g * g);
        2.0 * s[i] + lap[i] + (-ef * s_hat + b2) * (1.0 + p[i]) - 2.0 * cross.re
    }))
}

/// The real equation of the continuity path at `t`, in the background metric
/// `m`, with `q` already equal to `tτ + ∇¹⁰η`.
pub fn real_mm_residual_continuity(m: &MetricState, f: &[f64], q: &SectionField, beta: &SectionField, t: f64) -> Result<Vec<f64>> {
    real_mm_residual_conformal_potential(m, f, q, &beta.scaled(cr(t)), m.surface.s_hat())
}

pub fn continuity_residual(m: &MetricState, f: &[f64], q: &SectionField, beta: &SectionField, t: f64) -> Result<MomentMapResidual> {
    let c = complex_mm_residual(m, q, f, beta, t)?;
    let r = real_mm_residual_continuity(m, f, q, beta, t)?;
    let margin = constraint_margin(m, f, q)?;
    MomentMapResidual::new(m, SystemForm::Continuity { t }, c, r, margin)
}

pub fn conformal_potential_residual(m: &MetricState, f: &[f64], q: &SectionField, beta: &SectionField, s_hat: f64) -> Result<MomentMapResidual> {
    let c = complex_mm_residual(m, q, f, beta, 1.0)?;
    let r = real_mm_residual_conformal_potential(m, f, q, beta, s_hat)?;
    let margin = constraint_margin(m, f, q)?;
    MomentMapResidual::new(m, SystemForm::ConformalPotential, c, r, margin)
}

/// `q̄(−, β^♯)^♯` as a real vector field, `∂_z` component `q̄β/g²`.
fn contracted_field(m: &MetricState, q: &SectionField, beta: &SectionField) -> VectorField {
    VectorField { vz: par::map_indexed(q.len(), |i| q.values[i].conj() * beta.values[i] / (m.density[i] * m.density[i])) }
}

/// Transformed system in `ω̃`: `2/(1+‖q‖²) ∇^{1,0*}q − β` and
/// `2s(ω̃) − ŝ(1+‖q‖²) − div(q̄(−,β^♯)^♯ + c.c.)`.
pub fn transformed_residual(m: &MetricState, q: &SectionField, beta: &SectionField, s_hat: f64) -> Result<MomentMapResidual> {
    let zero = vec![0.0; m.len()];
    let c = complex_mm_residual(m, q, &zero, beta, 1.0)?;
    let p = constraint_quantity(m, &zero, q)?;
    let s = operators::scalar_curvature(m);
    let div = operators::divergence(m, &contracted_field(m, q, beta))?;
    let r = par::map_indexed(m.len(), |i| 2.0 * s[i] - s_hat * (1.0 + p[i]) - div[i]);
    let margin = 1.0 - p.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    MomentMapResidual::new(m, SystemForm::Transformed, c, r, margin)
}

/// Average scalar curvature `∫s dA / ∫dA` of a metric, by quadrature.
pub fn average_scalar_curvature(m: &MetricState) -> f64 {
    m.integrate_real(&operators::scalar_curvature(m)) / m.area()
}

fn checked_norm(m: &MetricState, q: &SectionField) -> Result<Vec<f64>> {
    q.expect_weight(Weight::QUADRATIC)?;
    let n = operators::pointwise_norm_sq(m, q)?;
    let max_norm_sq = n.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !(max_norm_sq < 1.0) {
        return Err(HcscError::ConstraintViolation { max_norm_sq });
    }
    Ok(n)
}

/// `∇^{1,0*}∇^{1,0*}q` in `ω′`, a function.
pub fn complex_mm_residual_original(m: &MetricState, q: &SectionField) -> Result<SectionField> {
    checked_norm(m, q)?;
    operators::nabla10_adjoint(m, &operators::nabla10_adjoint(m, q)?)
}

/// `2s(ω′) − 2ŝ + Δ′ log(1+√(1−‖q‖²)) + div(2Re(g′(∂̄q, q̄))^♯ / (1+√(1−‖q‖²)))`.
pub fn real_mm_residual_original(m: &MetricState, q: &SectionField) -> Result<Vec<f64>> {
    let n = checked_norm(m, q)?;
    let big_f: Vec<f64> = n.iter().map(|n| 1.0 + (1.0 - n).sqrt()).collect();
    let log_f: Vec<f64> = big_f.iter().map(|x| x.ln()).collect();
    let lap = operators::laplacian_real(m, &log_f)?;
    let dq = operators::d_zbar(m, q)?;
    let v = VectorField { vz: par::map_indexed(q.len(), |i| dq.values[i] * q.values[i].conj() / (m.density[i].powi(3) * big_f[i])) };
    let div = operators::divergence(m, &v)?;
    let s = operators::scalar_curvature(m);
    let s_hat = average_scalar_curvature(m);
    Ok(par::map_indexed(q.len(), |i| 2.0 * s[i] - 2.0 * s_hat + lap[i] + div[i]))
}

pub fn original_residual(m: &MetricState, q: &SectionField) -> Result<MomentMapResidual> {
    let c = complex_mm_residual_original(m, q)?;
    let r = real_mm_residual_original(m, q)?;
    let margin = 1.0 - operators::pointwise_norm_sq(m, q)?.into_iter().fold(f64::NEG_INFINITY, f64::max);
    MomentMapResidual::new(m, SystemForm::Original, c, r, margin)
}

/// `F = 1 + √(1 − ‖q‖²_ω)`.
pub fn conformal_factor_f(m: &MetricState, q: &SectionField) -> Result<Vec<f64>> {
    Ok(checked_norm(m, q)?.iter().map(|n| 1.0 + (1.0 - n).sqrt()).collect())
}

/// `ω̃ = F ω`.
pub fn conformal_push<'a>(m: &MetricState<'a>, q: &SectionField) -> Result<MetricState<'a>> {
    m.scaled(&conformal_factor_f(m, q)?)
}

/// `ω = ½(1 + ‖q‖²_ω̃) ω̃`.
pub fn conformal_pull<'a>(m_tilde: &MetricState<'a>, q: &SectionField) -> Result<MetricState<'a>> {
    q.expect_weight(Weight::QUADRATIC)?;
    let n = operators::pointwise_norm_sq(m_tilde, q)?;
    m_tilde.scaled(&n.iter().map(|n| 0.5 * (1.0 + n)).collect::<Vec<_>>())
}

/// The original-system metric `ω′` of a continuity solution `(f, q)`:
/// the pull of `e^f ω` along `q`.
pub fn back_transform<'a>(surface: &'a SurfaceModel, f: &[f64]) -> Result<MetricState<'a>> {
    MetricState::conformal(surface, f)
}

pub fn original_metric<'a>(surface: &'a SurfaceModel, f: &[f64], q: &SectionField) -> Result<MetricState<'a>> {
    conformal_pull(&back_transform(surface, f)?, q)
}

/// Pointwise `s(ω) − F s(ω̃) + ½Δ_ω log F` for `ω̃ = Fω`.
pub fn conformal_identity_defect(m: &MetricState, q: &SectionField) -> Result<Vec<f64>> {
    let big_f = conformal_factor_f(m, q)?;
    let mt = m.scaled(&big_f)?;
    let log_f: Vec<f64> = big_f.iter().map(|x| x.ln()).collect();
    let lap = operators::laplacian_real(m, &log_f)?;
    let s = operators::scalar_curvature(m);
    let st = operators::scalar_curvature(&mt);
    Ok(par::map_indexed(m.len(), |i| s[i] - big_f[i] * st[i] + 0.5 * lap[i]))
}

/// Pointwise `div_ω(q̄(−,β^♯)^♯/F + c.c.) − F div_ω̃(q̄(−,β^♯̃)^♯̃ + c.c.)`.
pub fn divergence_identity_defect(m: &MetricState, q: &SectionField, beta: &SectionField) -> Result<Vec<f64>> {
    let big_f = conformal_factor_f(m, q)?;
    let mt = m.scaled(&big_f)?;
    let mut v = contracted_field(m, q, beta);
    v.vz.iter_mut().zip(&big_f).for_each(|(x, f)| *x /= f);
    let lhs = operators::divergence(m, &v)?;
    let rhs = operators::divergence(&mt, &contracted_field(&mt, q, beta))?;
    Ok(par::map_indexed(m.len(), |i| lhs[i] - big_f[i] * rhs[i]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub continuity: ResidualNorms,
    pub original: ResidualNorms,
    pub constraint_margin: f64,
    /// Largest original-system residual.
    pub discrepancy: f64,
    /// `discrepancy` over the largest continuity residual.
    pub ratio: f64,
}

/// Residuals of the conformal-potential form at `(f, q)` over the
/// background and of the original system on the back-transformed metric.
pub fn system_equivalence_check(surface: &SurfaceModel, f: &[f64], q: &SectionField, beta: &SectionField) -> Result<EquivalenceReport> {
    let m = MetricState::background(surface);
    let cont = continuity_residual(&m, f, q, beta, 1.0)?;
    let mp = original_metric(surface, f, q)?;
    let orig = original_residual(&mp, q)?;
    let discrepancy = orig.norms.sup();
    let scale = cont.norms.sup();
    Ok(EquivalenceReport {
        continuity: cont.norms,
        original: orig.norms,
        constraint_margin: cont.constraint_margin,
        discrepancy,
        ratio: if scale > 0.0 { discrepancy / scale } else if discrepancy == 0.0 { 0.0 } else { f64::INFINITY },
    })
}

/// Slack in the two-sided bound on `e^f`; both are nonnegative at true
/// solutions. The lower bound uses the global sup of `‖β‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C0Slack {
    /// `1 + ‖∇¹⁰β‖_∞ − max e^f`.
    pub upper: f64,
    /// `2 min e^f − 1 + ‖∇¹⁰β‖_∞ + ‖β‖²_∞`.
    pub lower: f64,
}

impl C0Slack {
    pub fn violated(&self, tol: f64) -> bool {
        self.upper < -tol || self.lower < -tol
    }
}

pub fn c0_bound_monitor(m: &MetricState, f: &[f64], beta: &SectionField) -> Result<C0Slack> {
    m.surface.check_len_real(f)?;
    let sup = |v: Vec<f64>| v.into_iter().fold(0.0f64, f64::max);
    let nb = sup(operators::pointwise_norm_sq(m, &operators::nabla10(m, beta)?)?).sqrt();
    let b2 = sup(operators::pointwise_norm_sq(m, beta)?);
    let max_ef = f.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)).exp();
    let min_ef = f.iter().fold(f64::INFINITY, |a, &b| a.min(b)).exp();
    Ok(C0Slack { upper: 1.0 + nb - max_ef, lower: 2.0 * min_ef - 1.0 + nb + b2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{sample, test_section, TrigField};
    use crate::surface::{build_surface, Conventions, SurfaceKind};

    fn torus(n: usize) -> SurfaceModel {
        build_surface(SurfaceKind::Torus { modulus: Complex64::new(0.1, 1.1) }, n).unwrap()
    }

    fn unit_torus() -> SurfaceModel {
        build_surface(SurfaceKind::Torus { modulus: Complex64::new(0.1, 0.5) }, 16).unwrap()
    }

    fn scaled_q(m: &MetricState, seed: u32, max_sq: f64) -> SectionField {
        let q = test_section(m.surface, Weight::QUADRATIC, seed);
        let n = operators::pointwise_norm_sq(m, &q).unwrap().into_iter().fold(0.0, f64::max);
        q.scaled(cr((max_sq / n).sqrt()))
    }

    fn sup(v: &[f64]) -> f64 {
        v.iter().fold(0.0f64, |a, b| a.max(b.abs()))
    }

    #[test]
    fn trivial_point_is_an_exact_zero() {
        let s = build_surface(SurfaceKind::Bolza, 48).unwrap();
        let m = MetricState::background(&s);
        let n = s.len();
        let zero = vec![0.0; n];
        let q = SectionField::zeros(Weight::QUADRATIC, n);
        let b = SectionField::zeros(Weight::ONE_FORM, n);
        for t in [0.0, 0.5, 1.0] {
            let r = continuity_residual(&m, &zero, &q, &b, t).unwrap();
            assert_eq!(r.norms.sup(), 0.0);
            assert_eq!(r.constraint_margin, 1.0);
        }
    }

    #[test]
    fn constant_potential_closed_form() {
        let s = build_surface(SurfaceKind::Bolza, 48).unwrap();
        let m = MetricState::background(&s);
        let n = s.len();
        let q = SectionField::zeros(Weight::QUADRATIC, n);
        let b = SectionField::zeros(Weight::ONE_FORM, n);
        for c in [-0.3, 0.2] {
            let r = real_mm_residual_continuity(&m, &vec![c; n], &q, &b, 1.0).unwrap();
            let expected = 2.0 * (c.exp() - 1.0);
            assert!(r.iter().all(|x| (x - expected).abs() < 1e-10 && x.signum() == expected.signum()));
        }
    }

    #[test]
    fn continuity_residual_matches_termwise_recomputation() {
        let s = torus(24);
        let m = MetricState::background(&s);
        let f: Vec<f64> = test_section(&s, Weight::FUNCTION, 4).real_parts().iter().map(|x| 0.2 * x).collect();
        let q = scaled_q(&m, 5, 0.5);
        let beta = test_section(&s, Weight::ONE_FORM, 6).scaled(cr(0.3));
        let t = 0.7;
        let r = real_mm_residual_continuity(&m, &f, &q, &beta, t).unwrap();
        let g = s.background_density[0];
        let tor = s.torus().unwrap();
        let fc: Vec<Complex64> = f.iter().map(|&x| cr(x)).collect();
        let dd = tor.apply(crate::surface::DiffOp::DzDzbar, &fc);
        let df = tor.apply(crate::surface::DiffOp::Dz, &fc);
        let db = tor.apply(crate::surface::DiffOp::Dz, &beta.values);
        for i in 0..s.len() {
            let tb = beta.values[i] * t;
            let p = (-2.0 * f[i]).exp() * q.values[i].norm_sqr() / (g * g);
            let lap = -2.0 * dd[i].re / g;
            let pair = (-f[i]).exp() * q.values[i].conj() * (db[i] * t - tb * df[i]) / (g * g);
            let expected = lap + (tb.norm_sqr() / g) * (1.0 + p) - 2.0 * pair.re;
            assert!((r[i] - expected).abs() < 1e-11 * (1.0 + expected.abs()), "{i}: {} {}", r[i], expected);
        }
    }

    #[test]
    fn push_pull_round_trip() {
        let s = build_surface(SurfaceKind::Bolza, 48).unwrap();
        let m = MetricState::background(&s);
        let q = scaled_q(&m, 2, 0.8);
        let back = conformal_pull(&conformal_push(&m, &q).unwrap(), &q).unwrap();
        let err = back.density.iter().zip(&m.density).fold(0.0f64, |a, (x, y)| a.max((x / y - 1.0).abs()));
        assert!(err <= 1e-13, "{err}");
        let zero = SectionField::zeros(Weight::QUADRATIC, s.len());
        let two = conformal_push(&m, &zero).unwrap();
        assert!(two.density.iter().zip(&m.density).all(|(a, b)| *a == 2.0 * b));
        let pulled = conformal_pull(&two, &zero).unwrap();
        assert!(pulled.density.iter().zip(&m.density).all(|(a, b)| a == b));
    }

    #[test]
    fn conformal_factor_at_three_quarters() {
        let s = unit_torus();
        let m = MetricState::background(&s);
        let g = s.background_density[0];
        let q = SectionField::constant(Weight::QUADRATIC, s.len(), cr(0.75f64.sqrt() * g * g));
        let f = conformal_factor_f(&m, &q).unwrap();
        assert!(f.iter().all(|x| (x - 1.5).abs() < 1e-15));
    }

    #[test]
    fn constraint_violation_is_an_error() {
        let s = unit_torus();
        let m = MetricState::background(&s);
        let g = s.background_density[0];
        let q = SectionField::constant(Weight::QUADRATIC, s.len(), cr(g * g));
        assert_eq!(g, 1.0);
        assert!(matches!(original_residual(&m, &q), Err(HcscError::ConstraintViolation { .. })));
        assert!(matches!(conformal_push(&m, &q), Err(HcscError::ConstraintViolation { .. })));
        let zero = vec![0.0; s.len()];
        assert_eq!(constraint_margin(&m, &zero, &q).unwrap(), 0.0);
    }

    #[test]
    fn original_system_vanishes_at_the_flat_and_hyperbolic_metrics() {
        let s = torus(16);
        let m = MetricState::background(&s);
        let r = original_residual(&m, &SectionField::zeros(Weight::QUADRATIC, s.len())).unwrap();
        assert!(r.norms.sup() < 1e-12);
        let g = s.background_density[0];
        let q = SectionField::constant(Weight::QUADRATIC, s.len(), Complex64::new(0.2, 0.1) * g * g);
        let r = original_residual(&m, &q).unwrap();
        assert!(r.norms.sup() < 1e-12);
        let s = build_surface(SurfaceKind::Bolza, 48).unwrap();
        let m = MetricState::background(&s);
        let r = original_residual(&m, &SectionField::zeros(Weight::QUADRATIC, s.len())).unwrap();
        assert!(r.norms.real_sup < 1e-10, "{:?}", r.norms);
    }

    #[test]
    fn conformal_identity_on_torus_and_negative_control() {
        let s = torus(64);
        let m = MetricState::background(&s);
        let mut t = TrigField::sample_real(Complex64::new(0.1, 1.1), 2);
        t.modes.retain(|(a, b, _)| a.abs() + b.abs() <= 1);
        t.modes[0].2 = Complex64::new(0.4, 0.2);
        let q = sample(&s, Weight::QUADRATIC, |z| t.value(z));
        let n = operators::pointwise_norm_sq(&m, &q).unwrap().into_iter().fold(0.0, f64::max);
        let q = q.scaled(cr((0.8 / n).sqrt()));
        let d = sup(&conformal_identity_defect(&m, &q).unwrap());
        assert!(d < 1e-9, "{d}");
        let bad = torus(64).with_conventions(Conventions { curvature: 1.0, laplacian: 1.0 });
        let mb = MetricState::background(&bad);
        assert!(sup(&conformal_identity_defect(&mb, &q).unwrap()) > 1e-3);
    }

    #[test]
    fn divergence_identity_on_torus() {
        let s = torus(32);
        let m = MetricState::background(&s);
        let q = scaled_q(&m, 3, 0.9);
        let beta = test_section(&s, Weight::ONE_FORM, 8);
        let d = divergence_identity_defect(&m, &q, &beta).unwrap();
        assert!(sup(&d) < 1e-10 * (1.0 + beta.sup_abs() * q.sup_abs()));
    }

    #[test]
    fn c0_monitor_examples() {
        let s = torus(16);
        let m = MetricState::background(&s);
        let n = s.len();
        let b = SectionField::zeros(Weight::ONE_FORM, n);
        assert_eq!(c0_bound_monitor(&m, &vec![0.0; n], &b).unwrap(), C0Slack { upper: 0.0, lower: 1.0 });
        let c = c0_bound_monitor(&m, &vec![2f64.ln(); n], &b).unwrap();
        assert!((c.upper + 1.0).abs() < 1e-15);
        assert!(c.violated(1e-3));
    }

    #[test]
    fn torus_complex_residual_with_beta() {
        let s = torus(16);
        let m = MetricState::background(&s);
        let n = s.len();
        let g = s.background_density[0];
        let q = SectionField::constant(Weight::QUADRATIC, n, cr(0.3 * g * g));
        let beta = SectionField::constant(Weight::ONE_FORM, n, Complex64::new(0.0, 0.2));
        let r = complex_mm_residual(&m, &q, &vec![0.0; n], &beta, 0.5).unwrap();
        let norms = residual_norms(&m, &r, &vec![0.0; n]).unwrap();
        let beta_norm = operators::pointwise_norm_sq(&m, &beta).unwrap()[0].sqrt();
        assert!((norms.complex_sup - 0.5 * beta_norm).abs() < 1e-12);
    }
}
