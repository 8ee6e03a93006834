//! Newton–Krylov solver for the continuity path in the unknowns `(η, f)`,
//! with the exact linearization of the discrete residual map, a block
//! preconditioner and the fixed-point solve for the complex equation.
//!
//! On the torus constant shifts of `η` and `f` are gauge directions; the
//! system is bordered by `mean η = 0`, `∫e^f dA = Area` and two
//! multipliers `μ ∈ ℂ`, `ν ∈ ℝ` added to the equations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HcscError, Result};
use crate::field::{SectionField, Weight};
use crate::holomorphic::{GreenOperator, HolomorphicData};
use crate::linalg::{self, SparseLu};
use crate::moment_maps;
use crate::operators::{self, MetricState};
use crate::par;
use crate::surface::{DiffOp, SurfaceModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    Analytic,
    /// Analytic, plus a central-difference comparison along every Newton
    /// direction.
    FiniteDifferenceCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonSettings {
    pub tol_residual: f64,
    pub max_iters: usize,
    pub damping: f64,
    pub min_step: f64,
    pub jacobian_mode: JacobianMode,
    /// Relative GMRES tolerance for each Newton correction.
    pub linear_tol: f64,
}

impl NewtonSettings {
    pub fn for_surface(surface: &SurfaceModel) -> Self {
        Self {
            tol_residual: if surface.is_torus() { 1e-10 } else { 1e-8 },
            max_iters: 30,
            damping: 0.5,
            min_step: 1.0 / 1024.0,
            jacobian_mode: JacobianMode::Analytic,
            linear_tol: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.tol_residual > 0.0 && self.max_iters > 0 && self.damping > 0.0 && self.damping < 1.0 && self.min_step > 0.0 && self.linear_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(HcscError::Config("Newton settings must be positive, with damping in (0, 1)".into()))
        }
    }
}

/// Unknowns of the bordered system; `mu` and `nu` stay zero off the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct Unknowns {
    pub eta: Vec<Complex64>,
    pub f: Vec<f64>,
    pub mu: Complex64,
    pub nu: f64,
}

impl Unknowns {
    pub fn zeros(n: usize) -> Self {
        Self { eta: vec![Complex64::new(0.0, 0.0); n], f: vec![0.0; n], mu: Complex64::new(0.0, 0.0), nu: 0.0 }
    }

    fn axpy(&self, a: f64, d: &Unknowns) -> Unknowns {
        Unknowns {
            eta: self.eta.iter().zip(&d.eta).map(|(x, y)| x + a * y).collect(),
            f: self.f.iter().zip(&d.f).map(|(x, y)| x + a * y).collect(),
            mu: self.mu + a * d.mu,
            nu: self.nu + a * d.nu,
        }
    }
}

/// Values of the bordered residual map.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    /// Complex equation, weight (1,0).
    pub r1: Vec<Complex64>,
    /// Real equation.
    pub r2: Vec<f64>,
    pub mean_eta: Complex64,
    pub area_defect: f64,
}

#[derive(Debug, Clone)]
pub struct InnerSolve {
    pub eta: Vec<Complex64>,
    pub sweeps: usize,
    pub contraction: f64,
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub unknowns: Unknowns,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub linear_iterations: Vec<usize>,
    /// `max r_{k+1}/r_k²` over iterations that start below `1e−3` and end
    /// above the roundoff floor.
    pub quadratic_constant: Option<f64>,
    pub fd_check_max: Option<f64>,
}

/// The continuity system for fixed data `(τ, β)` on one surface.
pub struct ContinuityProblem<'a> {
    pub metric: MetricState<'a>,
    pub tau: SectionField,
    pub beta: SectionField,
    tau_adj: Vec<Complex64>,
    nabla_beta: Vec<Complex64>,
    green: GreenOperator<'a>,
    area: f64,
    gauge: bool,
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

impl<'a> ContinuityProblem<'a> {
    pub fn new(surface: &'a SurfaceModel, data: &HolomorphicData) -> Result<Self> {
        let metric = MetricState::background(surface);
        surface.check_len(&data.tau.values)?;
        surface.check_len(&data.beta.values)?;
        let tau_adj = operators::nabla10_adjoint(&metric, &data.tau)?.values;
        let nabla_beta = operators::nabla10(&metric, &data.beta)?.values;
        let green = GreenOperator::new(metric.clone())?;
        Ok(Self {
            area: metric.area(),
            gauge: surface.is_torus(),
            tau: data.tau.clone(),
            beta: data.beta.clone(),
            tau_adj,
            nabla_beta,
            green,
            metric,
        })
    }

    pub fn surface(&self) -> &'a SurfaceModel {
        self.metric.surface
    }

    pub fn len(&self) -> usize {
        self.metric.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metric.is_empty()
    }

    pub fn is_bordered(&self) -> bool {
        self.gauge
    }

    pub fn green(&self) -> &GreenOperator<'a> {
        &self.green
    }

    /// `q = tτ + ∇¹⁰η`.
    pub fn q(&self, t: f64, eta: &[Complex64]) -> Result<SectionField> {
        let d = operators::nabla10(&self.metric, &SectionField::new(Weight::ONE_FORM, eta.to_vec()))?;
        Ok(SectionField::new(Weight::QUADRATIC, d.values.iter().zip(&self.tau.values).map(|(d, tau)| d + t * tau).collect()))
    }

    fn mean(&self, v: &[Complex64]) -> Complex64 {
        self.metric.surface.integrate_values(v) / self.area
    }

    pub fn residual(&self, t: f64, u: &Unknowns) -> Result<Residual> {
        let m = &self.metric;
        let q = self.q(t, &u.eta)?;
        let mut r1 = moment_maps::complex_mm_residual(m, &q, &u.f, &self.beta, t)?.values;
        let mut r2 = moment_maps::real_mm_residual_continuity(m, &u.f, &q, &self.beta, t)?;
        let (mut mean_eta, mut area_defect) = (c(0.0), 0.0);
        if self.gauge {
            r1.iter_mut().for_each(|x| *x += u.mu);
            r2.iter_mut().for_each(|x| *x += u.nu);
            mean_eta = self.mean(&u.eta);
            let dens: Vec<f64> = u.f.iter().map(|f| f.exp()).collect();
            area_defect = m.surface.integrate_real(&dens) - self.area;
        }
        Ok(Residual { r1, r2, mean_eta, area_defect })
    }

    /// Directional derivative of [`Self::residual`] at `u` along `du`.
    pub fn jvp(&self, t: f64, u: &Unknowns, du: &Unknowns) -> Result<Residual> {
        let m = &self.metric;
        let q = self.q(t, &u.eta)?;
        let a = operators::nabla10_adjoint(m, &q)?;
        let qd = operators::nabla10(m, &SectionField::new(Weight::ONE_FORM, du.eta.clone()))?;
        let ad = operators::nabla10_adjoint(m, &qd)?;
        let lap_phi = operators::laplacian_real(m, &du.f)?;
        let dphi = operators::d_z(m, &SectionField::from_real(Weight::FUNCTION, &du.f))?;
        let df = operators::d_z(m, &SectionField::from_real(Weight::FUNCTION, &u.f))?;
        let s_hat = m.surface.s_hat();
        let terms = par::map_indexed(m.len(), |i| {
            let g = m.density[i];
            let g2 = g * g;
            let (e, ef, phi) = ((-u.f[i]).exp(), u.f[i].exp(), du.f[i]);
            let qi = q.values[i];
            let p = e * e * qi.norm_sqr() / g2;
            let pd = -2.0 * phi * p + 2.0 * e * e * (qd.values[i] * qi.conj()).re / g2;
            let b = t * self.beta.values[i];
            let nb = t * self.nabla_beta[i];
            let bb = b.norm_sqr() / g;
            let dr1 = 2.0 * e * ad.values[i] / (1.0 + p) - 2.0 * phi * e * a.values[i] / (1.0 + p) - 2.0 * e * a.values[i] * pd / ((1.0 + p) * (1.0 + p));
            let mm = nb - b * df.values[i];
            let cross = (-phi * e * qi.conj() * mm + e * qd.values[i].conj() * mm - e * qi.conj() * b * dphi.values[i]) / g2;
            let dr2 = lap_phi[i] - s_hat * ef * phi * (1.0 + p) + (-s_hat * ef + bb) * pd - 2.0 * cross.re;
            let darea = ef * phi;
            (dr1, dr2, darea)
        });
        let mut r1: Vec<Complex64> = terms.iter().map(|x| x.0).collect();
        let mut r2: Vec<f64> = terms.iter().map(|x| x.1).collect();
        let (mut mean_eta, mut area_defect) = (c(0.0), 0.0);
        if self.gauge {
            r1.iter_mut().for_each(|x| *x += du.mu);
            r2.iter_mut().for_each(|x| *x += du.nu);
            mean_eta = self.mean(&du.eta);
            area_defect = m.surface.integrate_real(&terms.iter().map(|x| x.2).collect::<Vec<_>>());
        }
        Ok(Residual { r1, r2, mean_eta, area_defect })
    }

    /// Largest of the pointwise background norm of the complex equation, the
    /// real equation and the gauge rows.
    pub fn residual_sup(&self, r: &Residual) -> f64 {
        let c1 = r.r1.iter().zip(&self.metric.density).fold(0.0f64, |a, (x, g)| a.max(x.norm_sqr() / g)).sqrt();
        let c2 = r.r2.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        c1.max(c2).max(r.mean_eta.norm()).max(r.area_defect.abs())
    }

    pub fn dim(&self) -> usize {
        3 * self.len() + if self.gauge { 3 } else { 0 }
    }

    pub fn pack_unknowns(&self, u: &Unknowns) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend(u.eta.iter().map(|x| x.re));
        v.extend(u.eta.iter().map(|x| x.im));
        v.extend_from_slice(&u.f);
        if self.gauge {
            v.extend([u.mu.re, u.mu.im, u.nu]);
        }
        v
    }

    pub fn unpack_unknowns(&self, v: &[f64]) -> Unknowns {
        let n = self.len();
        let eta = (0..n).map(|i| Complex64::new(v[i], v[n + i])).collect();
        let f = v[2 * n..3 * n].to_vec();
        let (mu, nu) = if self.gauge { (Complex64::new(v[3 * n], v[3 * n + 1]), v[3 * n + 2]) } else { (c(0.0), 0.0) };
        Unknowns { eta, f, mu, nu }
    }

    pub fn pack_residual(&self, r: &Residual) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend(r.r1.iter().map(|x| x.re));
        v.extend(r.r1.iter().map(|x| x.im));
        v.extend_from_slice(&r.r2);
        if self.gauge {
            v.extend([r.mean_eta.re, r.mean_eta.im, r.area_defect]);
        }
        v
    }

    fn unpack_residual(&self, v: &[f64]) -> Residual {
        let u = self.unpack_unknowns(v);
        Residual { r1: u.eta, r2: u.f, mean_eta: u.mu, area_defect: u.nu }
    }

    /// Central difference `(G(u + h du) − G(u − h du)) / 2h`, packed.
    pub fn fd_directional(&self, t: f64, u: &Unknowns, du: &Unknowns, h: f64) -> Result<Vec<f64>> {
        let plus = self.pack_residual(&self.residual(t, &u.axpy(h, du))?);
        let minus = self.pack_residual(&self.residual(t, &u.axpy(-h, du))?);
        Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    }

    /// Relative 2-norm error between the analytic and the central-difference
    /// directional derivative.
    pub fn jacobian_error(&self, t: f64, u: &Unknowns, du: &Unknowns, h: f64) -> Result<f64> {
        let exact = self.pack_residual(&self.jvp(t, u, du)?);
        let fd = self.fd_directional(t, u, du, h)?;
        let num: f64 = exact.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let den: f64 = fd.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(if den > 0.0 { num / den } else { num })
    }

    /// Fixed point `η ← G[½tβ(e^f + e^{−f}‖tτ + ∇¹⁰η‖²) − t∇^{1,0*}τ]` solving the
    /// complex equation for fixed `f`.
    pub fn complex_mm_inner_solve(&self, f: &[f64], t: f64, eta_init: &[Complex64], tol: f64, max_sweeps: usize) -> Result<InnerSolve> {
        let m = &self.metric;
        let mut eta = eta_init.to_vec();
        let mut last_delta = f64::INFINITY;
        let mut contraction: f64 = 0.0;
        let mut bad = 0;
        for sweep in 1..=max_sweeps {
            let q = self.q(t, &eta)?;
            let rho: Vec<Complex64> = par::map_indexed(m.len(), |i| {
                let g = m.density[i];
                let s = f[i].exp() + (-f[i]).exp() * q.values[i].norm_sqr() / (g * g);
                0.5 * t * self.beta.values[i] * s - t * self.tau_adj[i]
            });
            let next = self.green.solve(&SectionField::new(Weight::ONE_FORM, rho))?.values;
            let diff = SectionField::new(Weight::ONE_FORM, next.iter().zip(&eta).map(|(a, b)| a - b).collect());
            let delta = m.l2_norm(&diff)?;
            let size = m.l2_norm(&SectionField::new(Weight::ONE_FORM, next.clone()))?;
            eta = next;
            if last_delta.is_finite() && last_delta > 0.0 {
                let factor = delta / last_delta;
                contraction = contraction.max(factor);
                bad = if factor >= 1.0 { bad + 1 } else { 0 };
                if bad >= 3 {
                    return Err(HcscError::ContractionFailure { factor });
                }
            }
            if delta <= tol * size || delta == 0.0 {
                return Ok(InnerSolve { eta, sweeps: sweep, contraction });
            }
            last_delta = delta;
        }
        Err(HcscError::ContractionFailure { factor: contraction })
    }

    fn preconditioner(&self, t: f64, u: &Unknowns) -> Result<Preconditioner> {
        let m = &self.metric;
        let q = self.q(t, &u.eta)?;
        let p = moment_maps::constraint_quantity(m, &u.f, &q)?;
        let s_hat = m.surface.s_hat();
        let c1: Vec<f64> = p.iter().zip(&u.f).map(|(p, f)| 2.0 * (-f).exp() / (1.0 + p)).collect();
        let c2: Vec<f64> = p.iter().zip(&u.f).map(|(p, f)| -s_hat * f.exp() * (1.0 + p)).collect();
        if self.gauge {
            let nn = c1.len() as f64;
            let slope: Vec<f64> = u.f.iter().map(|f| f.exp()).collect();
            return Ok(Preconditioner::Torus {
                c1: c1.iter().sum::<f64>() / nn,
                c2: c2.iter().sum::<f64>() / nn,
                area_slope: m.surface.integrate_real(&slope),
            });
        }
        let lap = operators::matrices::laplacian(m)?;
        let mut entries = Vec::with_capacity(lap.nnz() + lap.rows);
        for r in 0..lap.rows {
            entries.extend(lap.row(r).map(|(col, v)| (r, col, v.re)));
            entries.push((r, r, c2[r]));
        }
        Ok(Preconditioner::Octagon { c1, f_lu: SparseLu::new(lap.rows, &entries)? })
    }

    fn apply_preconditioner(&self, pre: &Preconditioner, r: &Residual) -> Unknowns {
        match pre {
            Preconditioner::Octagon { c1, f_lu } => {
                let rhs: Vec<Complex64> = r.r1.iter().zip(c1).map(|(x, c)| x / c).collect();
                Unknowns { eta: self.green.apply_inverse(&rhs), f: f_lu.solve(&r.r2), mu: c(0.0), nu: 0.0 }
            }
            &Preconditioner::Torus { c1, c2, area_slope } => {
                let tor = self.metric.surface.torus().expect("torus chart");
                let g = self.metric.density[0];
                let cl = self.metric.surface.conventions.laplacian;
                let n = r.r1.len() as f64;
                let mu = r.r1.iter().sum::<Complex64>() / n;
                let nu = r.r2.iter().sum::<f64>() / n;
                let eta_osc = tor.multiply(&r.r1, |k1, k2| {
                    let lam = -c1 * tor.symbol(DiffOp::Dzbar, k1, k2) * tor.symbol(DiffOp::Dz, k1, k2) / g;
                    if lam.norm() < 1e-12 * c1.abs().max(1e-300) {
                        c(0.0)
                    } else {
                        1.0 / lam
                    }
                });
                let r2c: Vec<Complex64> = r.r2.iter().map(|&x| c(x)).collect();
                let f_osc = tor.multiply(&r2c, |k1, k2| {
                    if k1 == 0 && k2 == 0 {
                        return c(0.0);
                    }
                    let lam = -cl * tor.symbol(DiffOp::DzDzbar, k1, k2).re / g + c2;
                    c(1.0 / lam)
                });
                let phi0 = r.area_defect / area_slope;
                Unknowns {
                    eta: eta_osc.iter().map(|x| x + r.mean_eta).collect(),
                    f: f_osc.iter().map(|x| x.re + phi0).collect(),
                    mu,
                    nu,
                }
            }
        }
    }

    /// Newton iteration at fixed `t` from `init`, with backtracking that
    /// also rejects steps leaving the constraint region.
    pub fn newton_solve(&self, t: f64, init: Unknowns, settings: &NewtonSettings) -> Result<NewtonOutcome> {
        settings.validate()?;
        let mut u = init;
        let margin = |u: &Unknowns| -> Result<f64> { moment_maps::constraint_margin(&self.metric, &u.f, &self.q(t, &u.eta)?) };
        let m0 = margin(&u)?;
        if !(m0 > 0.0) {
            return Err(HcscError::ConstraintViolation { max_norm_sq: 1.0 - m0 });
        }
        let mut r = self.residual(t, &u)?;
        let mut rsup = self.residual_sup(&r);
        let mut history = vec![rsup];
        let mut linear_iterations = Vec::new();
        let mut fd_check_max: Option<f64> = None;
        let norm2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for it in 0..settings.max_iters {
            if rsup <= settings.tol_residual {
                return Ok(self.outcome(u, it, history, linear_iterations, fd_check_max));
            }
            let pre = self.preconditioner(t, &u)?;
            let b: Vec<f64> = self.pack_residual(&r).iter().map(|x| -x).collect();
            let apply = |v: &[f64]| -> Vec<f64> {
                let du = self.unpack_unknowns(v);
                self.pack_residual(&self.jvp(t, &u, &du).expect("state validated"))
            };
            let precond = |v: &[f64]| -> Vec<f64> { self.pack_unknowns(&self.apply_preconditioner(&pre, &self.unpack_residual(v))) };
            let sol = linalg::gmres(apply, precond, &b, settings.linear_tol, 60, 600)?;
            linear_iterations.push(sol.iterations);
            if !sol.converged && sol.relative_residual > 1e-4 {
                return Err(HcscError::LinearSolve(format!("GMRES stalled at relative residual {:.3e}", sol.relative_residual)));
            }
            let du = self.unpack_unknowns(&sol.x);
            if settings.jacobian_mode == JacobianMode::FiniteDifferenceCheck {
                let scale = norm2(&sol.x).max(1e-300);
                let dir = self.unpack_unknowns(&sol.x.iter().map(|x| x / scale).collect::<Vec<_>>());
                let e = self.jacobian_error(t, &u, &dir, 1e-5)?;
                fd_check_max = Some(fd_check_max.map_or(e, |m: f64| m.max(e)));
            }
            let merit = norm2(&self.pack_residual(&r));
            let mut lambda = 1.0;
            loop {
                let trial = u.axpy(lambda, &du);
                if margin(&trial)? > 0.0 {
                    let rt = self.residual(t, &trial)?;
                    if norm2(&self.pack_residual(&rt)) < merit * (1.0 - 1e-4 * lambda) {
                        u = trial;
                        r = rt;
                        break;
                    }
                } else if lambda * settings.damping < settings.min_step {
                    let worst = 1.0 - margin(&trial)?;
                    return Err(HcscError::ConstraintViolation { max_norm_sq: worst });
                }
                lambda *= settings.damping;
                if lambda < settings.min_step {
                    return Err(HcscError::DampingFloor { residual: rsup });
                }
            }
            rsup = self.residual_sup(&r);
            history.push(rsup);
        }
        if rsup <= settings.tol_residual {
            return Ok(self.outcome(u, settings.max_iters, history, linear_iterations, fd_check_max));
        }
        Err(HcscError::NewtonMaxIters { iters: settings.max_iters, residual: rsup })
    }

    fn outcome(&self, unknowns: Unknowns, iterations: usize, history: Vec<f64>, linear_iterations: Vec<usize>, fd_check_max: Option<f64>) -> NewtonOutcome {
        let quadratic_constant = history
            .windows(2)
            .filter(|w| w[0] < 1e-3 && w[1] > ROUNDOFF_FLOOR)
            .map(|w| w[1] / (w[0] * w[0]))
            .fold(None, |a: Option<f64>, x| Some(a.map_or(x, |a| a.max(x))));
        NewtonOutcome { unknowns, iterations, residual_history: history, linear_iterations, quadratic_constant, fd_check_max }
    }
}

const ROUNDOFF_FLOOR: f64 = 1e3 * f64::EPSILON;

enum Preconditioner {
    Octagon { c1: Vec<f64>, f_lu: SparseLu<f64> },
    Torus { c1: f64, c2: f64, area_slope: f64 },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::test_section;
    use crate::surface::{build_surface, SurfaceKind};

    fn cs(x: f64) -> Complex64 {
        c(x)
    }

    fn torus() -> SurfaceModel {
        build_surface(SurfaceKind::Torus { modulus: Complex64::new(0.15, 0.95) }, 24).unwrap()
    }

    fn data(s: &SurfaceModel, tau: f64, beta: f64) -> HolomorphicData {
        let tau = test_section(s, Weight::QUADRATIC, 1).scaled(cs(tau));
        let beta = test_section(s, Weight::ONE_FORM, 2).scaled(cs(beta));
        HolomorphicData::from_fields(s, tau, beta).unwrap()
    }

    fn random_state(p: &ContinuityProblem, seed: u32, scale: f64) -> Unknowns {
        let s = p.surface();
        let eta = test_section(s, Weight::ONE_FORM, seed).scaled(cs(scale * 0.3)).values;
        let f = test_section(s, Weight::FUNCTION, seed + 7).real_parts().iter().map(|x| scale * x).collect();
        Unknowns { eta, f, mu: Complex64::new(0.01, -0.02), nu: 0.03 }
    }

    #[test]
    fn jacobian_matches_central_differences_on_torus() {
        let s = torus();
        let p = ContinuityProblem::new(&s, &data(&s, 0.2, 0.3)).unwrap();
        for seed in 0..3 {
            let u = random_state(&p, seed, 0.2);
            for dseed in 0..4 {
                let du = random_state(&p, 20 + dseed, 1.0);
                let e = p.jacobian_error(0.7, &u, &du, 1e-5).unwrap();
                assert!(e < 1e-6, "seed {seed}/{dseed}: {e}");
            }
        }
    }

    #[test]
    fn trivial_jacobian_is_block_diagonal() {
        let s = torus();
        let n = s.len();
        let zero = HolomorphicData::zero(&s).unwrap();
        let p = ContinuityProblem::new(&s, &zero).unwrap();
        let u = Unknowns::zeros(n);
        let mut du = random_state(&p, 3, 1.0);
        du.mu = cs(0.0);
        du.nu = 0.0;
        let j = p.jvp(0.0, &u, &du).unwrap();
        let m = MetricState::background(&s);
        let l = operators::bochner_factored(&m, &SectionField::new(Weight::ONE_FORM, du.eta.clone())).unwrap();
        let lap = operators::laplacian_real(&m, &du.f).unwrap();
        for i in 0..n {
            assert!((j.r1[i] - 2.0 * l.values[i]).norm() < 1e-12);
            assert!((j.r2[i] - lap[i]).abs() < 1e-12);
        }
        let u = random_state(&p, 5, 0.2);
        let j = p.jvp(0.4, &u, &du).unwrap();
        let j2 = p.jvp(0.4, &u, &Unknowns::zeros(n).axpy(2.0, &du)).unwrap();
        let (a, b) = (p.pack_residual(&j), p.pack_residual(&j2));
        let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(a.iter().zip(&b).all(|(a, b)| (2.0 * a - b).abs() <= 1e-13 * scale));
    }

    #[test]
    fn bolza_trivial_jacobian_has_the_zeroth_order_term() {
        let s = build_surface(SurfaceKind::Bolza, 48).unwrap();
        let n = s.len();
        let p = ContinuityProblem::new(&s, &HolomorphicData::zero(&s).unwrap()).unwrap();
        let u = Unknowns::zeros(n);
        let du = random_state(&p, 4, 1.0);
        let j = p.jvp(0.0, &u, &Unknowns { mu: cs(0.0), nu: 0.0, ..du.clone() }).unwrap();
        let m = MetricState::background(&s);
        let lap = operators::laplacian_real(&m, &du.f).unwrap();
        for i in 0..n {
            assert!((j.r2[i] - lap[i] - 2.0 * du.f[i]).abs() < 1e-10 * (1.0 + lap[i].abs()));
        }
        let out = p.newton_solve(0.0, u, &NewtonSettings::for_surface(&s)).unwrap();
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn torus_rigidity() {
        let s = torus();
        let n = s.len();
        let d = HolomorphicData::from_fields(
            &s,
            SectionField::constant(Weight::QUADRATIC, n, cs(0.1)),
            SectionField::zeros(Weight::ONE_FORM, n),
        )
        .unwrap();
        let p = ContinuityProblem::new(&s, &d).unwrap();
        let out = p.newton_solve(1.0, Unknowns::zeros(n), &NewtonSettings::for_surface(&s)).unwrap();
        let f0 = out.unknowns.f[0];
        assert!(out.unknowns.f.iter().all(|f| (f - f0).abs() < 1e-10));
        assert!(out.unknowns.eta.iter().all(|e| e.norm() < 1e-10));
    }

    #[test]
    fn inner_solve_on_torus_detects_obstruction() {
        let s = torus();
        let n = s.len();
        let d = HolomorphicData::from_fields(
            &s,
            SectionField::zeros(Weight::QUADRATIC, n),
            SectionField::constant(Weight::ONE_FORM, n, cs(0.05)),
        )
        .unwrap();
        let p = ContinuityProblem::new(&s, &d).unwrap();
        let err = p.complex_mm_inner_solve(&vec![0.0; n], 0.5, &vec![cs(0.0); n], 1e-10, 50);
        assert!(matches!(err, Err(HcscError::FredholmObstruction { .. })));
        let zero = ContinuityProblem::new(&s, &HolomorphicData::zero(&s).unwrap()).unwrap();
        let sol = zero.complex_mm_inner_solve(&vec![0.0; n], 1.0, &vec![cs(0.0); n], 1e-10, 50).unwrap();
        assert!(sol.eta.iter().all(|e| *e == cs(0.0)));
    }
}
