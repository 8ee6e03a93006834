//! Flat torus `C / (Z + τZ)` sampled on a uniform grid in lattice
//! coordinates `z = x₁ + τ x₂`, with spectral derivatives.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::DiffOp;

pub struct TorusChart {
    pub tau: Complex64,
    pub grid_n: usize,
    pub points: Vec<Complex64>,
    pub lattice: Vec<(i32, i32)>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Unit-area flat density `1 / (2 Im τ)`.
    pub density: f64,
}

impl std::fmt::Debug for TorusChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TorusChart").field("tau", &self.tau).field("grid_n", &self.grid_n).finish()
    }
}

impl TorusChart {
    pub fn new(tau: Complex64, grid_n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid_n);
        let inverse = planner.plan_fft_inverse(grid_n);
        let mut points = Vec::with_capacity(grid_n * grid_n);
        let mut lattice = Vec::with_capacity(grid_n * grid_n);
        for j in 0..grid_n {
            for i in 0..grid_n {
                points.push(i as f64 / grid_n as f64 + tau * (j as f64 / grid_n as f64));
                lattice.push((i as i32, j as i32));
            }
        }
        Self { tau, grid_n, points, lattice, forward, inverse, density: 0.5 / tau.im }
    }

    pub fn len(&self) -> usize {
        self.grid_n * self.grid_n
    }

    /// Signed frequency of FFT bin `k`, in `[-N/2, N/2)`.
    pub fn frequency(&self, k: usize) -> i64 {
        let n = self.grid_n as i64;
        let k = k as i64;
        if 2 * k >= n {
            k - n
        } else {
            k
        }
    }

    fn is_nyquist(&self, k: usize) -> bool {
        self.grid_n % 2 == 0 && 2 * k == self.grid_n
    }

    /// Fourier symbol of `op` at bin `(k1, k2)`.
    pub fn symbol(&self, op: DiffOp, k1: usize, k2: usize) -> Complex64 {
        let tau = self.tau;
        let (m1, m2) = (self.frequency(k1) as f64, self.frequency(k2) as f64);
        let i = Complex64::i();
        let d1 = if self.is_nyquist(k1) { Complex64::new(0.0, 0.0) } else { 2.0 * PI * i * m1 };
        let d2 = if self.is_nyquist(k2) { Complex64::new(0.0, 0.0) } else { 2.0 * PI * i * m2 };
        match op {
            DiffOp::Dz => (tau.conj() * d1 - d2) / (tau.conj() - tau),
            DiffOp::Dzbar => (d2 - tau * d1) / (tau.conj() - tau),
            DiffOp::DzDzbar => {
                let s1 = -(2.0 * PI * m1).powi(2);
                let s2 = -(2.0 * PI * m2).powi(2);
                let mixed = (d1 * d2).re;
                let num = tau.norm_sqr() * s1 - 2.0 * tau.re * mixed + s2;
                Complex64::new(num / (4.0 * tau.im * tau.im), 0.0)
            }
        }
    }

    pub fn fft2(&self, v: &[Complex64], inverse: bool) -> Vec<Complex64> {
        let n = self.grid_n;
        let plan = if inverse { &self.inverse } else { &self.forward };
        let mut buf = v.to_vec();
        for row in buf.chunks_mut(n) {
            plan.process(row);
        }
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                col[j] = buf[j * n + i];
            }
            plan.process(&mut col);
            for j in 0..n {
                buf[j * n + i] = col[j];
            }
        }
        if inverse {
            let s = 1.0 / (n * n) as f64;
            buf.iter_mut().for_each(|x| *x *= s);
        }
        buf
    }

    /// Applies the Fourier multiplier `sym(k1, k2)`.
    pub fn multiply(&self, v: &[Complex64], sym: impl Fn(usize, usize) -> Complex64) -> Vec<Complex64> {
        let n = self.grid_n;
        let mut hat = self.fft2(v, false);
        for k2 in 0..n {
            for k1 in 0..n {
                hat[k2 * n + k1] *= sym(k1, k2);
            }
        }
        self.fft2(&hat, true)
    }

    pub fn apply(&self, op: DiffOp, v: &[Complex64]) -> Vec<Complex64> {
        self.multiply(v, |k1, k2| self.symbol(op, k1, k2))
    }

    /// Equal weights summing to the unit area.
    pub fn quadrature(&self) -> Vec<f64> {
        vec![1.0 / self.len() as f64; self.len()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_a_character() {
        let tau = Complex64::new(0.3, 1.1);
        let t = TorusChart::new(tau, 16);
        // f = exp(2πi(x₁ + 2x₂)), with x₂ = Im z / Im τ and x₁ = Re z − Re τ x₂.
        let f: Vec<Complex64> = t
            .lattice
            .iter()
            .map(|&(i, j)| Complex64::from_polar(1.0, 2.0 * PI * (i as f64 + 2.0 * j as f64) / 16.0))
            .collect();
        // ∂x₁/∂z = τ̄/(τ̄−τ), ∂x₂/∂z = −1/(τ̄−τ).
        let dz_exact = 2.0 * PI * Complex64::i() * (tau.conj() - 2.0) / (tau.conj() - tau);
        let d = t.apply(DiffOp::Dz, &f);
        for (a, b) in d.iter().zip(&f) {
            assert!((a - dz_exact * b).norm() < 1e-10);
        }
        let lap = t.apply(DiffOp::DzDzbar, &f);
        let dzb = t.apply(DiffOp::Dzbar, &t.apply(DiffOp::Dz, &f));
        for (a, b) in lap.iter().zip(&dzb) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn derivatives_of_constants_vanish() {
        let t = TorusChart::new(Complex64::new(0.0, 1.0), 16);
        let c = vec![Complex64::new(2.5, -1.0); t.len()];
        for op in [DiffOp::Dz, DiffOp::Dzbar, DiffOp::DzDzbar] {
            assert!(t.apply(op, &c).iter().all(|v| v.norm() < 1e-12));
        }
    }
}
