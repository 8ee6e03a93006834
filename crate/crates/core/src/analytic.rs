//! Closed-form smooth sections used as test data: Poincaré series on the
//! octagon and trigonometric polynomials on the torus, plus a
//! high-order difference-quotient evaluator for derivatives of closed forms.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::field::{SectionField, Weight};
use crate::mobius::{cosh_distance, Mobius};
use crate::surface::bolza::Octagon;
use crate::surface::{SurfaceKind, SurfaceModel};

/// `Σ_γ Σ_j c_j exp(−κ_j (cosh d(γz, p_j) − 1)) γ'(z)^a conj(γ'(z))^b`,
/// a smooth section of weight `(a, b)` on the Bolza surface.
#[derive(Debug, Clone)]
pub struct PoincareSeries {
    pub weight: Weight,
    pub bumps: Vec<(Complex64, f64, Complex64)>,
    elements: Vec<Mobius>,
}

impl PoincareSeries {
    pub fn new(weight: Weight, bumps: Vec<(Complex64, f64, Complex64)>) -> Self {
        // Terms below exp(-40) are dropped; evaluation points lie within 3.1 of the origin.
        let reach = bumps
            .iter()
            .map(|b| crate::mobius::distance(Complex64::new(0.0, 0.0), b.0) + (1.0 + 40.0 / b.1).acosh())
            .fold(0.0, f64::max);
        let elements = Octagon::regular().group_ball(3.1 + reach);
        Self { weight, bumps, elements }
    }

    /// A fixed generic example of the given weight.
    pub fn sample_series(weight: Weight, seed: u32) -> Self {
        let s = seed as f64;
        let bumps = vec![
            (Complex64::from_polar(0.3, 0.7 + s), 0.6, Complex64::new(1.0, 0.3 * s)),
            (Complex64::from_polar(0.55, 2.9 + 1.3 * s), 0.9, Complex64::new(-0.4, 0.8)),
            (Complex64::from_polar(0.1, -1.2 + 0.4 * s), 0.45, Complex64::new(0.25, -0.5)),
        ];
        Self::new(weight, bumps)
    }

    pub fn value(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for g in &self.elements {
            let w = g.apply(z);
            let d = g.derivative(z);
            let factor = d.powi(self.weight.0) * d.conj().powi(self.weight.1);
            let mut bump = Complex64::new(0.0, 0.0);
            for &(p, kappa, c) in &self.bumps {
                let e = kappa * (cosh_distance(w, p) - 1.0);
                if e < 40.0 {
                    bump += c * (-e).exp();
                }
            }
            acc += bump * factor;
        }
        acc
    }
}

/// Finite trigonometric sum `Σ c exp(2πi(m x₁ + n x₂))` on the torus, with
/// `z = x₁ + τ x₂`.
#[derive(Debug, Clone)]
pub struct TrigField {
    pub tau: Complex64,
    pub modes: Vec<(i64, i64, Complex64)>,
}

impl TrigField {
    pub fn coords(&self, z: Complex64) -> (f64, f64) {
        let x2 = z.im / self.tau.im;
        (z.re - self.tau.re * x2, x2)
    }

    pub fn value(&self, z: Complex64) -> Complex64 {
        let (x1, x2) = self.coords(z);
        self.modes.iter().map(|&(m, n, c)| c * Complex64::from_polar(1.0, 2.0 * PI * (m as f64 * x1 + n as f64 * x2))).sum()
    }

    /// Real-valued generic example (modes come in conjugate pairs).
    pub fn sample_real(tau: Complex64, seed: u32) -> Self {
        let s = seed as f64;
        let base = [(1, 0, Complex64::new(0.3, 0.1 * s)), (0, 1, Complex64::new(-0.2, 0.15)), (2, -1, Complex64::new(0.05, -0.04)), (1, 2, Complex64::new(0.02 * s, 0.03))];
        let mut modes = vec![(0, 0, Complex64::new(0.1, 0.0))];
        for (m, n, c) in base {
            modes.push((m, n, c));
            modes.push((-m, -n, c.conj()));
        }
        Self { tau, modes }
    }
}

/// Samples a closed form at the surface points.
pub fn sample(surface: &SurfaceModel, weight: Weight, f: impl Fn(Complex64) -> Complex64) -> SectionField {
    SectionField::new(weight, surface.points().iter().map(|&z| f(z)).collect())
}

/// A generic smooth test section of weight `w` on either surface.
pub fn test_section(surface: &SurfaceModel, w: Weight, seed: u32) -> SectionField {
    match surface.kind {
        SurfaceKind::Bolza => {
            let p = PoincareSeries::sample_series(w, seed);
            sample(surface, w, |z| p.value(z))
        }
        SurfaceKind::Torus { modulus } => {
            let mut t = TrigField::sample_real(modulus, seed);
            if w != Weight::FUNCTION {
                t.modes.iter_mut().enumerate().for_each(|(k, m)| m.2 *= Complex64::from_polar(1.0, k as f64));
            }
            sample(surface, w, |z| t.value(z))
        }
    }
}

/// `∂_z f` by Richardson-extrapolated central differences.
pub fn fd_dz(f: &impl Fn(Complex64) -> Complex64, z: Complex64, h: f64) -> Complex64 {
    let (dx, dy) = fd_grad(f, z, h);
    0.5 * (dx - Complex64::i() * dy)
}

pub fn fd_dzbar(f: &impl Fn(Complex64) -> Complex64, z: Complex64, h: f64) -> Complex64 {
    let (dx, dy) = fd_grad(f, z, h);
    0.5 * (dx + Complex64::i() * dy)
}

/// `∂_z ∂_z̄ f = ¼(f_xx + f_yy)` by Richardson-extrapolated differences.
pub fn fd_ddbar(f: &impl Fn(Complex64) -> Complex64, z: Complex64, h: f64) -> Complex64 {
    let lap = |h: f64| {
        let (e1, e2) = (Complex64::new(h, 0.0), Complex64::new(0.0, h));
        (f(z + e1) + f(z - e1) + f(z + e2) + f(z - e2) - 4.0 * f(z)) / (h * h)
    };
    0.25 * (4.0 * lap(h / 2.0) - lap(h)) / 3.0
}

fn fd_grad(f: &impl Fn(Complex64) -> Complex64, z: Complex64, h: f64) -> (Complex64, Complex64) {
    let d = |e: Complex64, h: f64| (f(z + e * h) - f(z - e * h)) / (2.0 * h);
    let rich = |e: Complex64| (4.0 * d(e, h / 2.0) - d(e, h)) / 3.0;
    (rich(Complex64::new(1.0, 0.0)), rich(Complex64::new(0.0, 1.0)))
}
