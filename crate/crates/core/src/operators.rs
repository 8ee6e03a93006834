//! Differential operators on weighted sections for a metric conformal to
//! the background: `∂`, `∂̄`, the (1,0) Levi-Civita connection and its
//! adjoint, Laplacians, curvature, index raising and divergence.
//!
//! A weight-`(a, b)` coefficient `φ` has pointwise norm `g^{−(a+b)} |φ|²`;
//! ∇¹⁰ on `(m, 0)` is `∂φ − m (∂ log g) φ` and its adjoint is `−g⁻¹ ∂̄φ`.

use num_complex::Complex64;

use crate::error::{HcscError, Result};
use crate::field::{SectionField, Weight};
use crate::par;
use crate::sparse::CsrMatrix;
use crate::surface::{DiffOp, SurfaceModel};

/// A metric `e^u g₀` on the surface.
#[derive(Debug, Clone)]
pub struct MetricState<'a> {
    pub surface: &'a SurfaceModel,
    /// `u`, real.
    pub conformal_factor: Vec<f64>,
    /// `g = e^u g₀`.
    pub density: Vec<f64>,
    /// `∂_z log g`.
    pub dlog: Vec<Complex64>,
    /// Gauss curvature `−g⁻¹ ∂∂̄ log g`.
    pub gauss: Vec<f64>,
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

impl<'a> MetricState<'a> {
    pub fn background(surface: &'a SurfaceModel) -> Self {
        let n = surface.len();
        MetricState {
            surface,
            conformal_factor: vec![0.0; n],
            density: surface.background_density.clone(),
            dlog: surface.background_dlog.clone(),
            gauss: vec![surface.background_curvature(); n],
        }
    }

    /// `e^u g₀` for a real conformal factor `u`.
    pub fn conformal(surface: &'a SurfaceModel, u: &[f64]) -> Result<Self> {
        surface.check_len_real(u)?;
        let rho: Vec<f64> = u.iter().map(|x| x.exp()).collect();
        Ok(Self::from_ratio(surface, u.to_vec(), &rho))
    }

    /// Metric with explicitly supplied density.
    pub fn from_density(surface: &'a SurfaceModel, density: &[f64]) -> Result<Self> {
        surface.check_len_real(density)?;
        if let Some(k) = density.iter().position(|&d| !(d > 0.0)) {
            return Err(HcscError::Config(format!("metric density is not positive at sample {k}")));
        }
        let rho: Vec<f64> = density.iter().zip(&surface.background_density).map(|(d, g)| d / g).collect();
        let u = rho.iter().map(|r| r.ln()).collect();
        Ok(Self::from_ratio(surface, u, &rho))
    }

    /// `factor · g`, the metric `F ω`.
    pub fn scaled(&self, factor: &[f64]) -> Result<Self> {
        let d: Vec<f64> = self.density.iter().zip(factor).map(|(g, f)| g * f).collect();
        Self::from_density(self.surface, &d)
    }

    // Curvature and ∂ log g use derivatives of the ratio ρ = g/g₀ itself,
    // ∂∂̄ log ρ = ∂∂̄ρ/ρ − |∂ρ|²/ρ².
    fn from_ratio(surface: &'a SurfaceModel, u: Vec<f64>, rho: &[f64]) -> Self {
        let rc: Vec<Complex64> = rho.iter().map(|&r| c(r)).collect();
        let d = surface.apply(DiffOp::Dz, Weight::FUNCTION, &rc);
        let dd = surface.apply(DiffOp::DzDzbar, Weight::FUNCTION, &rc);
        let k0 = surface.background_curvature();
        let n = surface.len();
        let mut density = Vec::with_capacity(n);
        let mut dlog = Vec::with_capacity(n);
        let mut gauss = Vec::with_capacity(n);
        for k in 0..n {
            let g0 = surface.background_density[k];
            let r = rho[k];
            let ddlog = dd[k].re / r - d[k].norm_sqr() / (r * r);
            density.push(r * g0);
            dlog.push(d[k] / r + surface.background_dlog[k]);
            gauss.push((k0 - ddlog / g0) / r);
        }
        MetricState { surface, conformal_factor: u, density, dlog, gauss }
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    pub fn density_field(&self) -> SectionField {
        SectionField::from_real(Weight::DENSITY, &self.density)
    }

    pub fn conformal_field(&self) -> SectionField {
        SectionField::from_real(Weight::FUNCTION, &self.conformal_factor)
    }

    pub fn l2_inner(&self, a: &SectionField, b: &SectionField) -> Result<Complex64> {
        self.surface.l2_inner_with(a, b, &self.density)
    }

    pub fn l2_norm(&self, a: &SectionField) -> Result<f64> {
        Ok(self.l2_inner(a, a)?.re.max(0.0).sqrt())
    }

    /// `∫ f dA_g` for a function given by its samples.
    pub fn integrate_real(&self, f: &[f64]) -> f64 {
        let rel: Vec<f64> = f.iter().enumerate().map(|(k, v)| v * self.density[k] / self.surface.background_density[k]).collect();
        self.surface.integrate_real(&rel)
    }

    pub fn area(&self) -> f64 {
        self.integrate_real(&vec![1.0; self.len()])
    }

    fn check(&self, f: &SectionField) -> Result<()> {
        self.surface.check_len(&f.values)
    }
}

/// Real vector field `V^z ∂_z + c.c.`, stored by its `∂_z` component.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub vz: Vec<Complex64>,
}

pub fn d_z(m: &MetricState, f: &SectionField) -> Result<SectionField> {
    m.check(f)?;
    let v = m.surface.apply(DiffOp::Dz, f.weight, &f.values);
    Ok(SectionField::new(f.weight + Weight(1, 0), v))
}

pub fn d_zbar(m: &MetricState, f: &SectionField) -> Result<SectionField> {
    m.check(f)?;
    let v = m.surface.apply(DiffOp::Dzbar, f.weight, &f.values);
    Ok(SectionField::new(f.weight + Weight(0, 1), v))
}

/// `∂_z ∂_z̄ f`, weight raised by `(1, 1)`.
pub fn d_zzbar(m: &MetricState, f: &SectionField) -> Result<SectionField> {
    m.check(f)?;
    let v = m.surface.apply(DiffOp::DzDzbar, f.weight, &f.values);
    Ok(SectionField::new(f.weight + Weight(1, 1), v))
}

fn holomorphic_degree(f: &SectionField) -> Result<i32> {
    match f.weight {
        Weight(m, 0) if m >= 0 => Ok(m),
        w => Err(HcscError::UnsupportedWeight(w)),
    }
}

/// ∇¹⁰ on `(m, 0)`.
pub fn nabla10(m: &MetricState, f: &SectionField) -> Result<SectionField> {
    let k = holomorphic_degree(f)? as f64;
    let d = d_z(m, f)?;
    let values = par::map_indexed(f.len(), |i| d.values[i] - k * m.dlog[i] * f.values[i]);
    Ok(SectionField::new(d.weight, values))
}

/// Formal adjoint of ∇¹⁰, from `(m, 0)` to `(m − 1, 0)` for `m ∈ {1, 2}`.
pub fn nabla10_adjoint(m: &MetricState, f: &SectionField) -> Result<SectionField> {
    let k = holomorphic_degree(f)?;
    if !(1..=2).contains(&k) {
        return Err(HcscError::UnsupportedWeight(f.weight));
    }
    let d = d_zbar(m, f)?;
    let values = par::map_indexed(f.len(), |i| -d.values[i] / m.density[i]);
    Ok(SectionField::new(Weight(k - 1, 0), values))
}

/// `Δ f = −(c/g) ∂∂̄ f` with `c` the Laplacian convention constant.
pub fn laplacian(m: &MetricState, f: &SectionField) -> Result<SectionField> {
    f.expect_weight(Weight::FUNCTION)?;
    let dd = d_zzbar(m, f)?;
    let cl = m.surface.conventions.laplacian;
    let values = par::map_indexed(f.len(), |i| -cl * dd.values[i] / m.density[i]);
    Ok(SectionField::new(Weight::FUNCTION, values))
}

pub fn laplacian_real(m: &MetricState, f: &[f64]) -> Result<Vec<f64>> {
    Ok(laplacian(m, &SectionField::from_real(Weight::FUNCTION, f))?.real_parts())
}

/// Scalar curvature `−c g⁻¹ ∂∂̄ log g`, `c` the curvature convention constant.
pub fn scalar_curvature(m: &MetricState) -> Vec<f64> {
    let cs = m.surface.conventions.curvature;
    m.gauss.iter().map(|k| cs * k).collect()
}

/// `g^{−(a+b)} |φ|²`.
pub fn pointwise_norm_sq(m: &MetricState, f: &SectionField) -> Result<Vec<f64>> {
    m.check(f)?;
    let p = -f.weight.degree();
    Ok(par::map_indexed(f.len(), |i| f.values[i].norm_sqr() * m.density[i].powi(p)))
}

/// Raises the index of a `(0,1)`- or `(1,0)`-form; a `(1,0)`-form `β`
/// becomes the real field `β^♯ + c.c.` with `∂_z` component `β̄/g`.
pub fn sharp(m: &MetricState, f: &SectionField) -> Result<VectorField> {
    m.check(f)?;
    let vz = match f.weight {
        Weight(0, 1) => par::map_indexed(f.len(), |i| f.values[i] / m.density[i]),
        Weight(1, 0) => par::map_indexed(f.len(), |i| f.values[i].conj() / m.density[i]),
        w => return Err(HcscError::UnsupportedWeight(w)),
    };
    Ok(VectorField { vz })
}

/// `div V = (2/g) Re ∂_z(g V^z)`.
pub fn divergence(m: &MetricState, v: &VectorField) -> Result<Vec<f64>> {
    m.surface.check_len(&v.vz)?;
    let gv: Vec<Complex64> = v.vz.iter().zip(&m.density).map(|(x, g)| x * g).collect();
    let d = m.surface.apply(DiffOp::Dz, Weight(0, 1), &gv);
    Ok(par::map_indexed(v.vz.len(), |i| 2.0 * d[i].re / m.density[i]))
}

/// Gradient `grad f = (∂̄f)^♯`.
pub fn gradient(m: &MetricState, f: &[f64]) -> Result<VectorField> {
    let d = d_zbar(m, &SectionField::from_real(Weight::FUNCTION, f))?;
    sharp(m, &d)
}

/// Bochner Laplacian `∇^{1,0*}∇¹⁰` on `(1,0)`, in the second-order form
/// `−g⁻¹∂∂̄η − Kη + g⁻¹(∂ log g)∂̄η` with `K` the Gauss curvature.
pub fn bochner(m: &MetricState, eta: &SectionField) -> Result<SectionField> {
    eta.expect_weight(Weight::ONE_FORM)?;
    let dd = d_zzbar(m, eta)?;
    let db = d_zbar(m, eta)?;
    let values = par::map_indexed(eta.len(), |i| {
        let g = m.density[i];
        (-dd.values[i] + m.dlog[i] * db.values[i]) / g - m.gauss[i] * eta.values[i]
    });
    Ok(SectionField::new(Weight::ONE_FORM, values))
}

/// `∇^{1,0*}∇¹⁰` on `(1,0)` as the composition of the two first-order
/// operators.
pub fn bochner_factored(m: &MetricState, eta: &SectionField) -> Result<SectionField> {
    eta.expect_weight(Weight::ONE_FORM)?;
    nabla10_adjoint(m, &nabla10(m, eta)?)
}

/// `∇¹⁰∇^{1,0*}` on `(k, 0)`, `k ∈ {1, 2}`: `−g⁻¹(∂∂̄φ − k (∂ log g) ∂̄φ)`.
/// Its kernel is the holomorphic sections.
pub fn holomorphic_laplacian(m: &MetricState, f: &SectionField) -> Result<SectionField> {
    let k = holomorphic_degree(f)?;
    if !(1..=2).contains(&k) {
        return Err(HcscError::UnsupportedWeight(f.weight));
    }
    let dd = d_zzbar(m, f)?;
    let db = d_zbar(m, f)?;
    let kf = k as f64;
    let values = par::map_indexed(f.len(), |i| -(dd.values[i] - kf * m.dlog[i] * db.values[i]) / m.density[i]);
    Ok(SectionField::new(f.weight, values))
}

/// Sparse matrices of the operators above on the octagon chart.
pub mod matrices {
    use super::*;

    fn op(m: &MetricState, op: DiffOp, w: Weight) -> Result<std::sync::Arc<CsrMatrix>> {
        m.surface.op_matrix(op, w).ok_or_else(|| HcscError::Config("operator matrices need the octagon chart".into()))
    }

    fn inv_g(m: &MetricState, scale: f64) -> Vec<Complex64> {
        m.density.iter().map(|g| c(scale / g)).collect()
    }

    pub fn bochner(m: &MetricState) -> Result<CsrMatrix> {
        let w = Weight::ONE_FORM;
        let dd = op(m, DiffOp::DzDzbar, w)?.scale_rows(&inv_g(m, -1.0));
        let dl: Vec<Complex64> = m.dlog.iter().zip(&m.density).map(|(d, g)| d / g).collect();
        let db = op(m, DiffOp::Dzbar, w)?.scale_rows(&dl);
        let k: Vec<Complex64> = m.gauss.iter().map(|&k| c(-k)).collect();
        Ok(dd.add(&db).add(&CsrMatrix::diagonal(&k)))
    }

    pub fn holomorphic_laplacian(m: &MetricState, k: i32) -> Result<CsrMatrix> {
        let w = Weight(k, 0);
        let dd = op(m, DiffOp::DzDzbar, w)?.scale_rows(&inv_g(m, -1.0));
        let dl: Vec<Complex64> = m.dlog.iter().zip(&m.density).map(|(d, g)| k as f64 * d / g).collect();
        let db = op(m, DiffOp::Dzbar, w)?.scale_rows(&dl);
        Ok(dd.add(&db))
    }

    /// `∇¹⁰` on `(1,0)`.
    pub fn nabla10(m: &MetricState) -> Result<CsrMatrix> {
        let dl: Vec<Complex64> = m.dlog.iter().map(|d| -d).collect();
        Ok(op(m, DiffOp::Dz, Weight::ONE_FORM)?.add(&CsrMatrix::diagonal(&dl)))
    }

    /// `∇^{1,0*} = −g⁻¹∂̄` on `(k, 0)`.
    pub fn nabla10_adjoint(m: &MetricState, k: i32) -> Result<CsrMatrix> {
        Ok(op(m, DiffOp::Dzbar, Weight(k, 0))?.scale_rows(&inv_g(m, -1.0)))
    }

    pub fn bochner_factored(m: &MetricState) -> Result<CsrMatrix> {
        Ok(nabla10_adjoint(m, 2)?.matmul(&nabla10(m)?))
    }

    pub fn laplacian(m: &MetricState) -> Result<CsrMatrix> {
        Ok(op(m, DiffOp::DzDzbar, Weight::FUNCTION)?.scale_rows(&inv_g(m, -m.surface.conventions.laplacian)))
    }
}
