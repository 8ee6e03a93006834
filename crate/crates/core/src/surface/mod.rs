//! Discretized surfaces: sample lattice, background metric, identifications
//! and quadrature.

pub mod bolza;
pub mod torus;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HcscError, Result};
use crate::field::{SectionField, Weight};
use crate::mobius::Mobius;
use crate::sparse::CsrMatrix;

use bolza::BolzaChart;
use torus::TorusChart;

/// Smallest accepted grid size.
pub const MIN_GRID: usize = 16;
/// Smallest octagon grid with positive quadrature weights.
pub const MIN_BOLZA_GRID: usize = 48;

/// Raw coordinate derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiffOp {
    Dz,
    Dzbar,
    DzDzbar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SurfaceKind {
    Torus { modulus: Complex64 },
    Bolza,
}

impl SurfaceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SurfaceKind::Torus { .. } => "torus",
            SurfaceKind::Bolza => "bolza",
        }
    }
}

/// Normalization constants shared by every operator.
///
/// With `ds² = 2g|dz|²`: `s = −curvature · g⁻¹ ∂∂̄ log g` and
/// `Δ = −laplacian · g⁻¹ ∂∂̄`. The defaults make `s` the Gauss curvature
/// and `Δ` the Riemannian `−div grad`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub curvature: f64,
    pub laplacian: f64,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions { curvature: 1.0, laplacian: 2.0 }
    }
}

/// One boundary identification of the fundamental domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pairing {
    Translation(Complex64),
    Mobius(Mobius),
}

impl Pairing {
    pub fn apply(&self, z: Complex64) -> Complex64 {
        match self {
            Pairing::Translation(w) => z + w,
            Pairing::Mobius(m) => m.apply(z),
        }
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        match self {
            Pairing::Translation(_) => Complex64::new(1.0, 0.0),
            Pairing::Mobius(m) => m.derivative(z),
        }
    }

    pub fn inverse(&self) -> Pairing {
        match self {
            Pairing::Translation(w) => Pairing::Translation(-w),
            Pairing::Mobius(m) => Pairing::Mobius(m.inverse()),
        }
    }
}

#[derive(Debug)]
pub enum Chart {
    Torus(TorusChart),
    Bolza(BolzaChart),
}

/// Plain-data description of a surface, round-trips through the config format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDescription {
    pub kind: String,
    pub grid_n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus_re: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus_im: Option<f64>,
}

impl SurfaceDescription {
    pub fn kind(&self) -> Result<SurfaceKind> {
        match self.kind.as_str() {
            "bolza" => Ok(SurfaceKind::Bolza),
            "torus" => Ok(SurfaceKind::Torus {
                modulus: Complex64::new(self.modulus_re.unwrap_or(0.0), self.modulus_im.unwrap_or(1.0)),
            }),
            other => Err(HcscError::Config(format!("unknown surface kind `{other}`"))),
        }
    }
}

#[derive(Debug)]
pub struct SurfaceModel {
    pub kind: SurfaceKind,
    pub grid_n: usize,
    pub chart: Chart,
    pub conventions: Conventions,
    pub pairings: Vec<Pairing>,
    /// `g₀` at every sample.
    pub background_density: Vec<f64>,
    /// `∂_z log g₀` at every sample.
    pub background_dlog: Vec<Complex64>,
    /// Background area element per sample.
    pub quadrature: Vec<f64>,
}

pub fn build_surface(kind: SurfaceKind, grid_n: usize) -> Result<SurfaceModel> {
    SurfaceModel::new(kind, grid_n)
}

impl SurfaceModel {
    pub fn new(kind: SurfaceKind, grid_n: usize) -> Result<Self> {
        let min = if kind == SurfaceKind::Bolza { MIN_BOLZA_GRID } else { MIN_GRID };
        if grid_n < min {
            return Err(HcscError::GridTooSmall { grid: grid_n, min });
        }
        match kind {
            SurfaceKind::Torus { modulus } => {
                if !(modulus.im > 0.0) || !modulus.re.is_finite() {
                    return Err(HcscError::DegenerateModulus(modulus));
                }
                let chart = TorusChart::new(modulus, grid_n);
                let n = chart.len();
                Ok(SurfaceModel {
                    kind,
                    grid_n,
                    pairings: vec![Pairing::Translation(Complex64::new(1.0, 0.0)), Pairing::Translation(modulus)],
                    background_density: vec![chart.density; n],
                    background_dlog: vec![Complex64::new(0.0, 0.0); n],
                    quadrature: chart.quadrature(),
                    chart: Chart::Torus(chart),
                    conventions: Conventions::default(),
                })
            }
            SurfaceKind::Bolza => {
                let chart = BolzaChart::new(grid_n);
                if chart.quadrature.iter().any(|&w| !(w > 0.0)) {
                    return Err(HcscError::Config(format!("octagon grid {grid_n} yields non-positive quadrature weights")));
                }
                Ok(SurfaceModel {
                    kind,
                    grid_n,
                    pairings: chart.octagon.generators.iter().map(|&g| Pairing::Mobius(g)).collect(),
                    background_density: chart.background.clone(),
                    background_dlog: chart.background_dlog.clone(),
                    quadrature: chart.quadrature.clone(),
                    chart: Chart::Bolza(chart),
                    conventions: Conventions::default(),
                })
            }
        }
    }

    pub fn from_description(d: &SurfaceDescription) -> Result<Self> {
        Self::new(d.kind()?, d.grid_n)
    }

    pub fn describe(&self) -> SurfaceDescription {
        let (re, im) = match self.kind {
            SurfaceKind::Torus { modulus } => (Some(modulus.re), Some(modulus.im)),
            SurfaceKind::Bolza => (None, None),
        };
        SurfaceDescription { kind: self.kind.name().into(), grid_n: self.grid_n, modulus_re: re, modulus_im: im }
    }

    /// Same surface with replaced normalization constants.
    pub fn with_conventions(mut self, c: Conventions) -> Self {
        self.conventions = c;
        self
    }

    pub fn len(&self) -> usize {
        self.background_density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.kind, SurfaceKind::Torus { .. })
    }

    pub fn genus(&self) -> usize {
        if self.is_torus() {
            1
        } else {
            2
        }
    }

    pub fn points(&self) -> &[Complex64] {
        match &self.chart {
            Chart::Torus(t) => &t.points,
            Chart::Bolza(b) => &b.points,
        }
    }

    pub fn lattice(&self) -> &[(i32, i32)] {
        match &self.chart {
            Chart::Torus(t) => &t.lattice,
            Chart::Bolza(b) => &b.lattice,
        }
    }

    /// Chart grid spacing.
    pub fn spacing(&self) -> f64 {
        match &self.chart {
            Chart::Torus(t) => 1.0 / t.grid_n as f64,
            Chart::Bolza(b) => b.spacing,
        }
    }

    /// Exact Gauss curvature of the background metric.
    pub fn background_curvature(&self) -> f64 {
        if self.is_torus() {
            0.0
        } else {
            -1.0
        }
    }

    /// Average scalar curvature `ŝ` of the original-variable system.
    pub fn s_hat(&self) -> f64 {
        2.0 * self.background_curvature()
    }

    pub fn exact_area(&self) -> f64 {
        if self.is_torus() {
            1.0
        } else {
            4.0 * std::f64::consts::PI
        }
    }

    pub fn area(&self) -> f64 {
        self.quadrature.iter().sum()
    }

    pub fn check_len(&self, v: &[Complex64]) -> Result<()> {
        if v.len() != self.len() {
            return Err(HcscError::LengthMismatch { expected: self.len(), found: v.len() });
        }
        Ok(())
    }

    pub fn check_len_real(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.len() {
            return Err(HcscError::LengthMismatch { expected: self.len(), found: v.len() });
        }
        Ok(())
    }

    /// Raw coordinate derivative of samples of a weight-`w` field.
    pub fn apply(&self, op: DiffOp, w: Weight, v: &[Complex64]) -> Vec<Complex64> {
        match &self.chart {
            Chart::Torus(t) => t.apply(op, v),
            Chart::Bolza(b) => b.apply(op, w, v),
        }
    }

    /// Sparse matrix of `op` on weight-`w` samples (octagon chart only).
    pub fn op_matrix(&self, op: DiffOp, w: Weight) -> Option<Arc<CsrMatrix>> {
        match &self.chart {
            Chart::Torus(_) => None,
            Chart::Bolza(b) => Some(b.op_matrix(op, w)),
        }
    }

    pub fn torus(&self) -> Option<&TorusChart> {
        match &self.chart {
            Chart::Torus(t) => Some(t),
            Chart::Bolza(_) => None,
        }
    }

    pub fn bolza(&self) -> Option<&BolzaChart> {
        match &self.chart {
            Chart::Bolza(b) => Some(b),
            Chart::Torus(_) => None,
        }
    }

    /// Quadrature sum of a weight-(0,0) field against the background area.
    pub fn integrate(&self, f: &SectionField) -> Result<Complex64> {
        f.expect_weight(Weight::FUNCTION)?;
        self.check_len(&f.values)?;
        Ok(self.integrate_values(&f.values))
    }

    pub fn integrate_values(&self, v: &[Complex64]) -> Complex64 {
        v.iter().zip(&self.quadrature).map(|(x, w)| x * w).sum()
    }

    pub fn integrate_real(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.quadrature).map(|(x, w)| x * w).sum()
    }

    /// `∫ g^{−(a+b)} a b̄ dA_g` for the metric with density `density`.
    pub fn l2_inner_with(&self, a: &SectionField, b: &SectionField, density: &[f64]) -> Result<Complex64> {
        b.expect_weight(a.weight)?;
        self.check_len(&a.values)?;
        self.check_len(&b.values)?;
        let p = 1 - a.weight.degree();
        Ok((0..self.len())
            .map(|k| {
                let scale = density[k].powi(p) / self.background_density[k];
                a.values[k] * b.values[k].conj() * (scale * self.quadrature[k])
            })
            .sum())
    }

    /// Background-metric inner product.
    pub fn l2_inner(&self, a: &SectionField, b: &SectionField) -> Result<Complex64> {
        self.l2_inner_with(a, b, &self.background_density)
    }

    /// Defect of the surface group relation (zero for the torus translations).
    pub fn group_relation_defect(&self) -> f64 {
        match &self.chart {
            Chart::Torus(t) => {
                let w = Complex64::new(1.0, 0.0) + t.tau - Complex64::new(1.0, 0.0) - t.tau;
                w.norm()
            }
            Chart::Bolza(b) => b.octagon.relation_word().distance_to_identity(),
        }
    }

    /// Largest deviation from the identity when a weight-`w` value is carried
    /// across each pairing and back, over all samples.
    pub fn automorphy_round_trip(&self, w: Weight) -> f64 {
        let factor = |gp: Complex64| {
            let inv = 1.0 / gp;
            inv.powi(w.0) * inv.conj().powi(w.1)
        };
        let mut worst: f64 = 0.0;
        for p in &self.pairings {
            let back = p.inverse();
            for (k, &z) in self.points().iter().enumerate() {
                let v = Complex64::new(1.0 + k as f64 * 1e-3, -0.5);
                let zz = p.apply(z);
                let carried = v * factor(p.derivative(z));
                let returned = carried * factor(back.derivative(zz));
                worst = worst.max((returned - v).norm() / v.norm()).max((back.apply(zz) - z).norm());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(build_surface(SurfaceKind::Bolza, 8), Err(HcscError::GridTooSmall { grid: 8, .. })));
        let bad = SurfaceKind::Torus { modulus: Complex64::new(0.5, 0.0) };
        assert!(matches!(build_surface(bad, 32), Err(HcscError::DegenerateModulus(_))));
    }

    #[test]
    fn description_round_trips_through_toml() {
        let s = build_surface(SurfaceKind::Torus { modulus: Complex64::new(0.25, 1.5) }, 16).unwrap();
        let text = toml::to_string(&s.describe()).unwrap();
        let d: SurfaceDescription = toml::from_str(&text).unwrap();
        assert_eq!(d.kind().unwrap(), s.kind);
    }

    #[test]
    fn torus_area_is_one() {
        let s = build_surface(SurfaceKind::Torus { modulus: Complex64::new(0.0, 1.0) }, 64).unwrap();
        assert!((s.area() - 1.0).abs() < 1e-12);
    }
}
