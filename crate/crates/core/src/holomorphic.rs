//! Holomorphic 1-forms and quadratic differentials as kernels of
//! `∇¹⁰∇^{1,0*}`, the Bochner Laplacian and its Green operator.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HcscError, Result};
use crate::field::{SectionField, Weight};
use crate::linalg::{self, SparseLu};
use crate::operators::{self, MetricState};
use crate::sparse::CsrMatrix;
use crate::surface::{DiffOp, SurfaceModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorTag {
    /// `∇¹⁰∇^{1,0*}` on 1-forms; kernel `H⁰(K)`.
    #[serde(rename = "bochner_on_K")]
    BochnerOnK,
    /// `∇¹⁰∇^{1,0*}` on quadratic differentials; kernel `H⁰(K²)`.
    #[serde(rename = "bochner_on_K2")]
    BochnerOnK2,
    /// `∇^{1,0*}∇¹⁰` on 1-forms, injective in genus ≥ 2.
    #[serde(rename = "bochner")]
    Bochner,
}

impl OperatorTag {
    pub fn weight(self) -> Weight {
        match self {
            OperatorTag::BochnerOnK | OperatorTag::Bochner => Weight::ONE_FORM,
            OperatorTag::BochnerOnK2 => Weight::QUADRATIC,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bochner_on_K" | "K" | "1" => Ok(OperatorTag::BochnerOnK),
            "bochner_on_K2" | "K2" | "2" => Ok(OperatorTag::BochnerOnK2),
            "bochner" => Ok(OperatorTag::Bochner),
            other => Err(HcscError::Config(format!("unknown operator tag `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub operator_tag: OperatorTag,
    pub eigenvalues: Vec<f64>,
    pub kernel_dim: usize,
    pub gap_ratio: f64,
    /// Largest `‖∇^{1,0*}φ‖ / ‖φ‖` (L²) over the kernel vectors.
    pub holomorphy_residual: f64,
}

/// Ratios below this floor count as exact zeros when forming gap ratios.
const ZERO_FLOOR: f64 = 1e-15;

/// Kernel dimension from an ascending list: the eigenvalues below the
/// highest relative jump of at least `gap_min`.
fn kernel_split(values: &[f64], gap_min: f64) -> (usize, f64) {
    let top = values.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(f64::MIN_POSITIVE);
    let floor = ZERO_FLOOR * top;
    let ratio = |j: usize| values[j].max(floor) / values[j - 1].max(floor);
    match (1..values.len()).rev().find(|&j| ratio(j) >= gap_min) {
        Some(j) => (j, ratio(j)),
        None => (0, (1..values.len()).map(ratio).fold(0.0, f64::max)),
    }
}

fn l2_weight(m: &MetricState, w: Weight) -> Vec<f64> {
    let s = m.surface;
    let p = 1 - w.degree();
    (0..s.len()).map(|k| (m.density[k].powi(p) / s.background_density[k] * s.quadrature[k]).sqrt()).collect()
}

/// The Hermitian form `AᴴA` on the octagon, where `A` is the first-order
/// factor of `tag` conjugated into the L² weights: `x ↦ ‖Aφ‖²` with
/// `φ = W^{−1/2}x`. Returns the matrix and `W^{1/2}`.
fn energy_matrix(m: &MetricState, tag: OperatorTag) -> Result<(CsrMatrix, Vec<f64>)> {
    let (a, target) = match tag {
        OperatorTag::BochnerOnK => (operators::matrices::nabla10_adjoint(m, 1)?, Weight::FUNCTION),
        OperatorTag::BochnerOnK2 => (operators::matrices::nabla10_adjoint(m, 2)?, Weight::ONE_FORM),
        OperatorTag::Bochner => (operators::matrices::nabla10(m)?, Weight::QUADRATIC),
    };
    let w = l2_weight(m, tag.weight());
    let winv: Vec<f64> = w.iter().map(|x| 1.0 / x).collect();
    let a = a.scale_both(&l2_weight(m, target), &winv);
    Ok((a.adjoint().matmul(&a), w))
}

/// Lowest `k` eigenvalues of `tag` in the background metric, the kernel
/// split, and an L²-orthonormal basis of the kernel in eigenvalue order.
pub fn kernel_spectrum(surface: &SurfaceModel, tag: OperatorTag, k: usize, gap_min: f64) -> Result<(SpectrumReport, Vec<SectionField>)> {
    let m = MetricState::background(surface);
    let weight = tag.weight();
    let n = surface.len();
    let (values, basis) = if let Some(t) = surface.torus() {
        // Flat torus: Fourier modes diagonalize all three operators with
        // symbol `−g⁻¹ · sym(∂∂̄)`.
        let g = surface.background_density[0];
        let mut modes: Vec<(f64, usize, usize)> = Vec::with_capacity(n);
        for k2 in 0..t.grid_n {
            for k1 in 0..t.grid_n {
                modes.push((-t.symbol(DiffOp::DzDzbar, k1, k2).re / g, k1, k2));
            }
        }
        modes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));
        modes.truncate(k);
        let values: Vec<f64> = modes.iter().map(|m| m.0).collect();
        let (split, _) = kernel_split(&values, gap_min);
        let basis = modes[..split]
            .iter()
            .map(|&(_, k1, k2)| {
                let f1 = t.frequency(k1) as f64;
                let f2 = t.frequency(k2) as f64;
                let v = t
                    .lattice
                    .iter()
                    .map(|&(i, j)| {
                        let ph = 2.0 * std::f64::consts::PI * (f1 * i as f64 + f2 * j as f64) / t.grid_n as f64;
                        Complex64::from_polar(1.0, ph)
                    })
                    .collect();
                normalized(&m, SectionField::new(weight, v))
            })
            .collect::<Result<Vec<_>>>()?;
        (values, basis)
    } else {
        let (h, w) = energy_matrix(&m, tag)?;
        let shift = 1e-2;
        let pairs = linalg::lowest_eigenpairs(&h, k.min(n), shift, 1e-9, 400)?;
        let (split, _) = kernel_split(&pairs.values, gap_min);
        let basis = pairs.vectors[..split]
            .iter()
            .map(|v| normalized(&m, SectionField::new(weight, v.iter().zip(&w).map(|(x, w)| x / w).collect())))
            .collect::<Result<Vec<_>>>()?;
        (pairs.values, basis)
    };
    let (kernel_dim, gap_ratio) = kernel_split(&values, gap_min);
    let mut holomorphy_residual: f64 = 0.0;
    if tag != OperatorTag::Bochner {
        for b in &basis {
            let r = operators::nabla10_adjoint(&m, b)?;
            holomorphy_residual = holomorphy_residual.max(m.l2_norm(&r)? / m.l2_norm(b)?);
        }
    }
    let report = SpectrumReport { operator_tag: tag, eigenvalues: values, kernel_dim, gap_ratio, holomorphy_residual };
    Ok((report, canonical_basis(basis)))
}

fn normalized(m: &MetricState, f: SectionField) -> Result<SectionField> {
    let n = m.l2_norm(&f)?;
    Ok(f.scaled(Complex64::new(1.0 / n, 0.0)))
}

/// Fixes the phase of each basis element: real and positive at the sample
/// of largest modulus.
fn canonical_basis(basis: Vec<SectionField>) -> Vec<SectionField> {
    basis
        .into_iter()
        .map(|f| {
            let p = f.values.iter().fold(Complex64::new(0.0, 0.0), |a, &v| if v.norm() > a.norm() * (1.0 + 1e-9) { v } else { a });
            f.scaled(p.conj() / p.norm())
        })
        .collect()
}

/// `L = ∇^{1,0*}∇¹⁰` on 1-forms, as the composition of the discrete
/// first-order operators.
pub fn bochner_apply(m: &MetricState, eta: &SectionField) -> Result<SectionField> {
    operators::bochner_factored(m, eta)
}

/// Factorized Green operator of `L` for one metric.
pub struct GreenOperator<'a> {
    metric: MetricState<'a>,
    lu: Option<SparseLu<Complex64>>,
    /// Absolute and relative thresholds on the kernel projection.
    pub obstruction_tol: f64,
}

impl<'a> GreenOperator<'a> {
    pub fn new(metric: MetricState<'a>) -> Result<Self> {
        let lu = if metric.surface.torus().is_some() {
            None
        } else {
            Some(SparseLu::from_csr(&operators::matrices::bochner_factored(&metric)?)?)
        };
        Ok(Self { metric, lu, obstruction_tol: 1e-10 })
    }

    pub fn metric(&self) -> &MetricState<'a> {
        &self.metric
    }

    /// L² norm of the projection of `rho` onto `ker L` (constants on the torus).
    pub fn kernel_projection(&self, rho: &SectionField) -> Result<f64> {
        if self.lu.is_some() {
            return Ok(0.0);
        }
        let one = SectionField::constant(Weight::ONE_FORM, rho.len(), Complex64::new(1.0, 0.0));
        let ip = self.metric.l2_inner(rho, &one)?;
        Ok(ip.norm() / self.metric.l2_norm(&one)?)
    }

    /// Solves `L η = ρ`; on the torus requires `ρ ⊥ ker L` and returns the
    /// solution orthogonal to the kernel.
    pub fn solve(&self, rho: &SectionField) -> Result<SectionField> {
        rho.expect_weight(Weight::ONE_FORM)?;
        self.metric.surface.check_len(&rho.values)?;
        if self.lu.is_some() {
            return Ok(SectionField::new(Weight::ONE_FORM, self.apply_inverse(&rho.values)));
        }
        let obstruction = self.kernel_projection(rho)?;
        let scale = self.metric.l2_norm(rho)?;
        if obstruction > self.obstruction_tol * scale.max(1.0) {
            return Err(HcscError::FredholmObstruction { obstruction });
        }
        Ok(SectionField::new(Weight::ONE_FORM, self.apply_inverse(&rho.values)))
    }

    /// `L⁻¹` without the kernel check; on the torus the discrete kernel
    /// modes are dropped.
    pub fn apply_inverse(&self, rho: &[Complex64]) -> Vec<Complex64> {
        if let Some(lu) = &self.lu {
            return lu.solve(rho);
        }
        let t = self.metric.surface.torus().expect("torus chart");
        let g = self.metric.density[0];
        t.multiply(rho, |k1, k2| {
            let lam = -t.symbol(DiffOp::Dzbar, k1, k2) * t.symbol(DiffOp::Dz, k1, k2) / g;
            if lam.norm() < 1e-12 {
                Complex64::new(0.0, 0.0)
            } else {
                1.0 / lam
            }
        })
    }
}

pub fn green_solve(m: &MetricState, rho: &SectionField) -> Result<SectionField> {
    GreenOperator::new(m.clone())?.solve(rho)
}

/// The parameters `(τ, β)` with certified holomorphy and background norms.
#[derive(Debug, Clone)]
pub struct HolomorphicData {
    pub tau: SectionField,
    pub beta: SectionField,
    pub tau_residual: f64,
    pub beta_residual: f64,
    pub tau_norm_c0: f64,
    pub beta_norm_c1: f64,
}

/// Kernel bases `H⁰(K)` and `H⁰(K²)`; on the torus both are the constants.
#[derive(Debug, Clone)]
pub struct HolomorphicBases {
    pub one_forms: Vec<SectionField>,
    pub quadratic: Vec<SectionField>,
    pub spectra: Vec<SpectrumReport>,
}

impl HolomorphicBases {
    pub fn compute(surface: &SurfaceModel, gap_min: f64) -> Result<Self> {
        if surface.is_torus() {
            let n = surface.len();
            let one = |w| vec![SectionField::constant(w, n, Complex64::new(1.0, 0.0))];
            let (r1, _) = kernel_spectrum(surface, OperatorTag::BochnerOnK, 4, gap_min)?;
            let (r2, _) = kernel_spectrum(surface, OperatorTag::BochnerOnK2, 4, gap_min)?;
            return Ok(Self { one_forms: one(Weight::ONE_FORM), quadratic: one(Weight::QUADRATIC), spectra: vec![r1, r2] });
        }
        let (r1, b1) = kernel_spectrum(surface, OperatorTag::BochnerOnK, surface.genus() + 3, gap_min)?;
        let (r2, b2) = kernel_spectrum(surface, OperatorTag::BochnerOnK2, 3 * surface.genus() - 3 + 3, gap_min)?;
        let m = MetricState::background(surface);
        let unit = |b: Vec<SectionField>| -> Result<Vec<SectionField>> {
            b.into_iter()
                .map(|f| {
                    let s = sup_norm(&m, &f)?;
                    Ok(f.scaled(Complex64::new(1.0 / s, 0.0)))
                })
                .collect()
        };
        Ok(Self { one_forms: unit(b1)?, quadratic: unit(b2)?, spectra: vec![r1, r2] })
    }
}

pub fn sup_norm(m: &MetricState, f: &SectionField) -> Result<f64> {
    Ok(operators::pointwise_norm_sq(m, f)?.into_iter().fold(0.0f64, f64::max).sqrt())
}

fn combine(basis: &[SectionField], spec: &[Complex64], weight: Weight, n: usize) -> Result<SectionField> {
    if spec.len() != basis.len() {
        return Err(HcscError::SpecDimension { expected: basis.len(), found: spec.len() });
    }
    let mut out = SectionField::zeros(weight, n);
    for (b, c) in basis.iter().zip(spec) {
        out.values.iter_mut().zip(&b.values).for_each(|(o, v)| *o += c * v);
    }
    Ok(out)
}

impl HolomorphicData {
    pub fn from_fields(surface: &SurfaceModel, tau: SectionField, beta: SectionField) -> Result<Self> {
        tau.expect_weight(Weight::QUADRATIC)?;
        beta.expect_weight(Weight::ONE_FORM)?;
        let m = MetricState::background(surface);
        let residual = |f: &SectionField| -> Result<f64> {
            let s = sup_norm(&m, f)?;
            if s == 0.0 {
                return Ok(0.0);
            }
            Ok(sup_norm(&m, &operators::nabla10_adjoint(&m, f)?)? / s)
        };
        let tau_norm_c0 = sup_norm(&m, &tau)?;
        let beta_norm_c1 = sup_norm(&m, &beta)? + sup_norm(&m, &operators::nabla10(&m, &beta)?)?;
        Ok(Self { tau_residual: residual(&tau)?, beta_residual: residual(&beta)?, tau_norm_c0, beta_norm_c1, tau, beta })
    }

    pub fn zero(surface: &SurfaceModel) -> Result<Self> {
        let n = surface.len();
        Self::from_fields(surface, SectionField::zeros(Weight::QUADRATIC, n), SectionField::zeros(Weight::ONE_FORM, n))
    }

    /// Same directions rescaled to the given background norms (zero stays zero).
    pub fn scaled_to(&self, surface: &SurfaceModel, tau_c0: f64, beta_c1: f64) -> Result<Self> {
        let st = if self.tau_norm_c0 > 0.0 { tau_c0 / self.tau_norm_c0 } else { 0.0 };
        let sb = if self.beta_norm_c1 > 0.0 { beta_c1 / self.beta_norm_c1 } else { 0.0 };
        Self::from_fields(surface, self.tau.scaled(Complex64::new(st, 0.0)), self.beta.scaled(Complex64::new(sb, 0.0)))
    }
}

/// Assembles `τ = Σ tau_spec_i τ_i`, `β = Σ beta_spec_i β_i` over the kernel bases.
pub fn make_holomorphic_data(surface: &SurfaceModel, bases: &HolomorphicBases, tau_spec: &[Complex64], beta_spec: &[Complex64]) -> Result<HolomorphicData> {
    let n = surface.len();
    let tau = combine(&bases.quadratic, tau_spec, Weight::QUADRATIC, n)?;
    let beta = combine(&bases.one_forms, beta_spec, Weight::ONE_FORM, n)?;
    HolomorphicData::from_fields(surface, tau, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::test_section;
    use crate::surface::{build_surface, SurfaceKind};

    fn torus() -> SurfaceModel {
        build_surface(SurfaceKind::Torus { modulus: Complex64::new(0.2, 0.9) }, 32).unwrap()
    }

    #[test]
    fn kernel_split_finds_the_jump() {
        assert_eq!(kernel_split(&[1e-9, 2e-9, 0.5, 0.7], 100.0).0, 2);
        assert_eq!(kernel_split(&[0.1, 0.2, 0.5], 100.0).0, 0);
        assert_eq!(kernel_split(&[0.0, 3.0, 4.0], 100.0).0, 1);
        assert_eq!(kernel_split(&[1e-11, 1e-6, 6e-6, 0.05, 0.1], 100.0), (3, 0.05 / 6e-6));
    }

    #[test]
    fn torus_kernels_are_constants() {
        let s = torus();
        for tag in [OperatorTag::BochnerOnK, OperatorTag::BochnerOnK2] {
            let (r, b) = kernel_spectrum(&s, tag, 5, 100.0).unwrap();
            assert_eq!(r.kernel_dim, 1);
            assert!(r.gap_ratio >= 1e3);
            assert!(b[0].values.iter().all(|v| (v - b[0].values[0]).norm() < 1e-12));
        }
    }

    #[test]
    fn torus_green_and_obstruction() {
        let s = torus();
        let m = MetricState::background(&s);
        let zero = SectionField::zeros(Weight::ONE_FORM, s.len());
        assert_eq!(green_solve(&m, &zero).unwrap().sup_abs(), 0.0);
        let dz = SectionField::constant(Weight::ONE_FORM, s.len(), Complex64::new(0.3, 0.0));
        match green_solve(&m, &dz) {
            Err(HcscError::FredholmObstruction { obstruction }) => {
                let expected = 0.3 / s.background_density[0].sqrt();
                assert!((obstruction - expected).abs() < 1e-12);
            }
            other => panic!("expected obstruction, got {other:?}"),
        }
        let mut eta = test_section(&s, Weight::ONE_FORM, 3);
        let mean = eta.values.iter().sum::<Complex64>() / s.len() as f64;
        eta.values.iter_mut().for_each(|v| *v -= mean);
        let back = green_solve(&m, &bochner_apply(&m, &eta).unwrap()).unwrap();
        let err = eta.values.iter().zip(&back.values).fold(0.0f64, |a, (x, y)| a.max((x - y).norm()));
        assert!(err < 1e-10 * eta.sup_abs());
    }

    #[test]
    fn bochner_is_self_adjoint_and_nonnegative() {
        let s = torus();
        let m = MetricState::background(&s);
        let a = test_section(&s, Weight::ONE_FORM, 1);
        let b = test_section(&s, Weight::ONE_FORM, 2);
        let lab = m.l2_inner(&bochner_apply(&m, &a).unwrap(), &b).unwrap();
        let alb = m.l2_inner(&a, &bochner_apply(&m, &b).unwrap()).unwrap();
        assert!((lab - alb).norm() < 1e-10 * lab.norm().max(1.0));
        let na = operators::nabla10(&m, &a).unwrap();
        let q = m.l2_inner(&bochner_apply(&m, &a).unwrap(), &a).unwrap();
        assert!((q.re - m.l2_inner(&na, &na).unwrap().re).abs() < 1e-10 * q.re.abs());
        assert!(q.re >= 0.0);
    }

    #[test]
    fn spec_dimension_is_checked() {
        let s = torus();
        let bases = HolomorphicBases::compute(&s, 100.0).unwrap();
        let err = make_holomorphic_data(&s, &bases, &[Complex64::new(1.0, 0.0); 2], &[]);
        assert!(matches!(err, Err(HcscError::SpecDimension { expected: 1, found: 2 })));
        let d = make_holomorphic_data(&s, &bases, &[Complex64::new(0.1, 0.0)], &[Complex64::new(0.0, 0.0)]).unwrap();
        assert_eq!(d.tau.values[5], Complex64::new(0.1, 0.0));
        assert_eq!(d.tau_residual, 0.0);
    }
}
