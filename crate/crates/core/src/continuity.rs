//! Continuity driver over `t ∈ [0, 1]`: adaptive steps, monitors, the
//! final back-transformation check and the run verdict.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{HcscError, Result};
use crate::field::{SectionField, Weight};
use crate::moment_maps::{self, C0Slack, EquivalenceReport, ResidualNorms};
use crate::newton::{ContinuityProblem, NewtonOutcome, NewtonSettings, Unknowns};
use crate::operators::MetricState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub grow: f64,
    pub shrink: f64,
    /// Steps accepted within this many Newton iterations grow the next step.
    pub fast_iters: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { initial_step: 0.1, min_step: 1e-3, max_step: 0.25, grow: 1.5, shrink: 0.5, fast_iters: 3 }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.min_step > 0.0
            && self.initial_step >= self.min_step
            && self.max_step >= self.initial_step
            && self.grow >= 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0;
        if ok {
            Ok(())
        } else {
            Err(HcscError::Config("continuity steps must satisfy 0 < min_step ≤ initial_step ≤ max_step".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monitors {
    /// Residual of the bordered Newton system.
    pub residual_sup: f64,
    /// Residual of the continuity system itself, multipliers excluded.
    pub residual: ResidualNorms,
    pub constraint_margin: f64,
    pub c0: C0Slack,
}

#[derive(Debug, Clone)]
pub struct ContinuityState {
    pub t: f64,
    pub eta: SectionField,
    pub f: Vec<f64>,
    /// `tτ + ∇¹⁰η`.
    pub q: SectionField,
    pub mu: Complex64,
    pub nu: f64,
    pub monitors: Monitors,
    pub newton_iters: usize,
}

impl ContinuityState {
    pub fn new(problem: &ContinuityProblem, t: f64, u: Unknowns, newton_iters: usize) -> Result<Self> {
        let m = &problem.metric;
        let q = problem.q(t, &u.eta)?;
        let r = problem.residual(t, &u)?;
        let cont = moment_maps::continuity_residual(m, &u.f, &q, &problem.beta, t)?;
        let beta_t = problem.beta.scaled(Complex64::new(t, 0.0));
        let monitors = Monitors {
            residual_sup: problem.residual_sup(&r),
            residual: cont.norms,
            constraint_margin: cont.constraint_margin,
            c0: moment_maps::c0_bound_monitor(m, &u.f, &beta_t)?,
        };
        Ok(Self { t, eta: SectionField::new(Weight::ONE_FORM, u.eta.clone()), f: u.f, q, mu: u.mu, nu: u.nu, monitors, newton_iters })
    }

    pub fn unknowns(&self) -> Unknowns {
        Unknowns { eta: self.eta.values.clone(), f: self.f.clone(), mu: self.mu, nu: self.nu }
    }

    /// The real field `f` as a function section.
    pub fn f_field(&self) -> SectionField {
        SectionField::from_real(Weight::FUNCTION, &self.f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub newton_iters: usize,
    pub residual_sup: f64,
    pub residual: ResidualNorms,
    pub constraint_margin: f64,
    pub c0: C0Slack,
    pub linear_iters: usize,
    pub quadratic_constant: Option<f64>,
    pub fd_check_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedStep {
    pub t: f64,
    pub dt: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Obstructed,
    MarginBreach,
    StepUnderflow,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Converged => 0,
            Verdict::Obstructed => 2,
            Verdict::MarginBreach => 3,
            Verdict::StepUnderflow => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::Obstructed => "obstructed",
            Verdict::MarginBreach => "margin_breach",
            Verdict::StepUnderflow => "step_underflow",
        }
    }
}

/// Checks on the `t = 1` state after back-transformation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalCheck {
    pub equivalence: EquivalenceReport,
    pub original: ResidualNorms,
    pub original_margin: f64,
    pub background_area: f64,
    /// `∫ e^f dA`.
    pub conformal_area: f64,
    pub original_area: f64,
    /// `sup |g′ − mean| / mean` of the original metric density (torus only).
    pub flatness: Option<f64>,
    pub c0: C0Slack,
}

pub fn final_check(problem: &ContinuityProblem, state: &ContinuityState) -> Result<FinalCheck> {
    let surface = problem.surface();
    let equivalence = moment_maps::system_equivalence_check(surface, &state.f, &state.q, &problem.beta)?;
    let mp = moment_maps::original_metric(surface, &state.f, &state.q)?;
    let orig = moment_maps::original_residual(&mp, &state.q)?;
    let mb = MetricState::background(surface);
    let ef: Vec<f64> = state.f.iter().map(|f| f.exp()).collect();
    let flatness = surface.is_torus().then(|| {
        let mean = mp.density.iter().sum::<f64>() / mp.len() as f64;
        mp.density.iter().fold(0.0f64, |a, g| a.max((g - mean).abs())) / mean
    });
    Ok(FinalCheck {
        equivalence,
        original: orig.norms,
        original_margin: orig.constraint_margin,
        background_area: mb.area(),
        conformal_area: mb.integrate_real(&ef),
        original_area: mp.area(),
        flatness,
        c0: moment_maps::c0_bound_monitor(&mb, &state.f, &problem.beta)?,
    })
}

#[derive(Debug, Clone)]
pub struct ContinuityReport {
    pub records: Vec<StepRecord>,
    pub rejected: Vec<RejectedStep>,
    pub final_state: Option<ContinuityState>,
    pub final_check: Option<FinalCheck>,
    pub verdict: Verdict,
    pub message: String,
}

impl ContinuityReport {
    pub fn last_t(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }
}

fn record(state: &ContinuityState, dt: f64, out: &NewtonOutcome) -> StepRecord {
    StepRecord {
        t: state.t,
        dt,
        newton_iters: out.iterations,
        residual_sup: state.monitors.residual_sup,
        residual: state.monitors.residual,
        constraint_margin: state.monitors.constraint_margin,
        c0: state.monitors.c0,
        linear_iters: out.linear_iterations.iter().sum(),
        quadratic_constant: out.quadratic_constant,
        fd_check_max: out.fd_check_max,
    }
}

/// Initial guess at `t`: the fixed-point solve of the complex equation with
/// `f` frozen, or the previous state when that does better.
fn initial_guess(problem: &ContinuityProblem, t: f64, prev: &Unknowns) -> Result<Unknowns> {
    let merit = |u: &Unknowns| -> Result<f64> {
        let r = problem.pack_residual(&problem.residual(t, u)?);
        Ok(r.iter().map(|x| x * x).sum::<f64>().sqrt())
    };
    match problem.complex_mm_inner_solve(&prev.f, t, &prev.eta, 1e-10, 200) {
        Ok(inner) => {
            let cand = Unknowns { eta: inner.eta, ..prev.clone() };
            let feasible = moment_maps::constraint_margin(&problem.metric, &cand.f, &problem.q(t, &cand.eta)?)? > 0.0;
            Ok(if feasible && merit(&cand)? < merit(prev)? { cand } else { prev.clone() })
        }
        Err(HcscError::ContractionFailure { .. }) => Ok(prev.clone()),
        Err(e) => Err(e),
    }
}

/// Gauge multipliers larger than this mean the bordered solve found no
/// solution of the unbordered system.
const OBSTRUCTION_TOL: f64 = 1e-8;

/// Follows `(tτ, tβ)` from `t = 0` to `t = 1`. `observer` sees every
/// accepted state.
pub fn continuity_run(
    problem: &ContinuityProblem,
    schedule: &Schedule,
    settings: &NewtonSettings,
    mut observer: impl FnMut(&ContinuityState),
) -> Result<ContinuityReport> {
    continuity_run_from(problem, schedule, settings, None, &mut observer)
}

/// As [`continuity_run`], resuming from an accepted state when given.
pub fn continuity_run_from(
    problem: &ContinuityProblem,
    schedule: &Schedule,
    settings: &NewtonSettings,
    start: Option<ContinuityState>,
    observer: &mut dyn FnMut(&ContinuityState),
) -> Result<ContinuityReport> {
    schedule.validate()?;
    settings.validate()?;
    let mut report = ContinuityReport {
        records: Vec::new(),
        rejected: Vec::new(),
        final_state: None,
        final_check: None,
        verdict: Verdict::StepUnderflow,
        message: String::new(),
    };
    let obstructed = |u: &Unknowns| problem.is_bordered() && (u.mu.norm() > OBSTRUCTION_TOL || u.nu.abs() > OBSTRUCTION_TOL);
    let mut state = match start {
        Some(s) => {
            let out = NewtonOutcome {
                unknowns: s.unknowns(),
                iterations: s.newton_iters,
                residual_history: vec![s.monitors.residual_sup],
                linear_iterations: Vec::new(),
                quadratic_constant: None,
                fd_check_max: None,
            };
            report.records.push(record(&s, 0.0, &out));
            s
        }
        None => {
            let out = problem.newton_solve(0.0, Unknowns::zeros(problem.len()), settings)?;
            let s = ContinuityState::new(problem, 0.0, out.unknowns.clone(), out.iterations)?;
            report.records.push(record(&s, 0.0, &out));
            observer(&s);
            s
        }
    };
    let mut dt = schedule.initial_step.min(schedule.max_step);
    while state.t < 1.0 {
        let t = (state.t + dt).min(1.0);
        let step = t - state.t;
        let attempt = initial_guess(problem, t, &state.unknowns()).and_then(|u0| problem.newton_solve(t, u0, settings));
        match attempt {
            Ok(out) if obstructed(&out.unknowns) => {
                report.verdict = Verdict::Obstructed;
                report.message = format!("no solution at t = {t}: gauge multipliers |μ| = {:.3e}, |ν| = {:.3e}", out.unknowns.mu.norm(), out.unknowns.nu.abs());
                report.final_state = Some(state);
                return Ok(report);
            }
            Ok(out) => {
                let next = ContinuityState::new(problem, t, out.unknowns.clone(), out.iterations)?;
                report.records.push(record(&next, step, &out));
                observer(&next);
                if out.iterations <= schedule.fast_iters {
                    dt = (step * schedule.grow).min(schedule.max_step);
                } else {
                    dt = step;
                }
                state = next;
            }
            Err(HcscError::FredholmObstruction { obstruction }) => {
                report.verdict = Verdict::Obstructed;
                report.message = format!("complex equation obstructed at t = {t}: kernel projection {obstruction:.3e}");
                report.final_state = Some(state);
                return Ok(report);
            }
            Err(e @ (HcscError::ConstraintViolation { .. } | HcscError::DampingFloor { .. } | HcscError::NewtonMaxIters { .. } | HcscError::LinearSolve(_))) => {
                let breach = matches!(e, HcscError::ConstraintViolation { .. });
                report.rejected.push(RejectedStep { t, dt: step, reason: e.to_string() });
                dt = step * schedule.shrink;
                if dt < schedule.min_step {
                    report.verdict = if breach { Verdict::MarginBreach } else { Verdict::StepUnderflow };
                    report.message = format!("step below {} at t = {}: {e}", schedule.min_step, state.t);
                    report.final_state = Some(state);
                    return Ok(report);
                }
            }
            Err(e) => return Err(e),
        }
    }
    let check = final_check(problem, &state)?;
    let ok = state.monitors.residual_sup <= settings.tol_residual;
    let margins_ok = report.records.iter().all(|r| r.constraint_margin > 0.0);
    report.verdict = if !margins_ok {
        Verdict::MarginBreach
    } else if ok {
        Verdict::Converged
    } else {
        Verdict::StepUnderflow
    };
    report.message = match report.verdict {
        Verdict::Converged => format!("reached t = 1 in {} steps", report.records.len().saturating_sub(1)),
        v => format!("{} at t = 1", v.name()),
    };
    report.final_state = Some(state);
    report.final_check = Some(check);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holomorphic::HolomorphicData;
    use crate::surface::{build_surface, SurfaceKind, SurfaceModel};

    fn torus() -> SurfaceModel {
        build_surface(SurfaceKind::Torus { modulus: Complex64::new(0.2, 1.05) }, 24).unwrap()
    }

    fn constant_data(s: &SurfaceModel, tau: f64, beta: f64) -> HolomorphicData {
        let n = s.len();
        HolomorphicData::from_fields(
            s,
            SectionField::constant(Weight::QUADRATIC, n, Complex64::new(tau, 0.0)),
            SectionField::constant(Weight::ONE_FORM, n, Complex64::new(beta, 0.0)),
        )
        .unwrap()
    }

    #[test]
    fn zero_data_converges_to_the_trivial_solution() {
        let s = torus();
        let d = HolomorphicData::zero(&s).unwrap();
        let p = ContinuityProblem::new(&s, &d).unwrap();
        let mut seen = 0;
        let rep = continuity_run(&p, &Schedule::default(), &NewtonSettings::for_surface(&s), |_| seen += 1).unwrap();
        assert_eq!(rep.verdict, Verdict::Converged);
        assert_eq!(seen, rep.records.len());
        let st = rep.final_state.unwrap();
        assert!(st.f.iter().all(|f| *f == 0.0));
        assert!(rep.records.iter().all(|r| r.newton_iters == 0));
    }

    #[test]
    fn torus_flat_case_is_rigid() {
        let s = torus();
        let p = ContinuityProblem::new(&s, &constant_data(&s, 0.1, 0.0)).unwrap();
        let rep = continuity_run(&p, &Schedule::default(), &NewtonSettings::for_surface(&s), |_| {}).unwrap();
        assert_eq!(rep.verdict, Verdict::Converged, "{}", rep.message);
        let chk = rep.final_check.unwrap();
        assert!(chk.flatness.unwrap() <= 1e-8);
        assert!((chk.conformal_area - chk.background_area).abs() < 1e-10);
    }

    #[test]
    fn torus_with_beta_is_obstructed() {
        let s = torus();
        let p = ContinuityProblem::new(&s, &constant_data(&s, 0.0, 0.05)).unwrap();
        let rep = continuity_run(&p, &Schedule::default(), &NewtonSettings::for_surface(&s), |_| {}).unwrap();
        assert_eq!(rep.verdict, Verdict::Obstructed);
        assert_eq!(rep.verdict.exit_code(), 2);
        assert!(rep.last_t() == 0.0);
    }

    #[test]
    fn schedule_validation() {
        assert!(Schedule::default().validate().is_ok());
        assert!(Schedule { min_step: 0.0, ..Default::default() }.validate().is_err());
        assert!(Schedule { initial_step: 0.5, ..Default::default() }.validate().is_err());
    }
}
