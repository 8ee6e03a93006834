//! Acceptance criteria 1 to 9. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use hcsck::analytic::test_section;
use hcsck::continuity::{continuity_run, ContinuityReport, Schedule, Verdict};
use hcsck::holomorphic::{make_holomorphic_data, sup_norm, HolomorphicBases, HolomorphicData, OperatorTag};
use hcsck::newton::{ContinuityProblem, NewtonSettings, Unknowns};
use hcsck::operators::MetricState;
use hcsck::verification::{adjointness_defect, conformal_identity, observed_order, random_quadratic, trivial_residual};
use hcsck::{build_surface, Result, SectionField, SurfaceKind, SurfaceModel, Weight};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GAP_MIN: f64 = 100.0;

fn cr(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn torus(n: usize) -> Result<SurfaceModel> {
    build_surface(SurfaceKind::Torus { modulus: Complex64::new(0.1, 1.1) }, n)
}

fn constant_data(s: &SurfaceModel, tau: f64, beta: f64) -> Result<HolomorphicData> {
    let n = s.len();
    HolomorphicData::from_fields(s, SectionField::constant(Weight::QUADRATIC, n, cr(tau)), SectionField::constant(Weight::ONE_FORM, n, cr(beta)))
}

/// Bolza 64 with its kernel bases and the solved end-to-end run.
struct Genus2 {
    surface: SurfaceModel,
    bases: HolomorphicBases,
    data: HolomorphicData,
    bases_seconds: f64,
}

impl Genus2 {
    fn new() -> Result<Self> {
        let start = Instant::now();
        let surface = build_surface(SurfaceKind::Bolza, 64)?;
        let bases = HolomorphicBases::compute(&surface, GAP_MIN)?;
        let bases_seconds = start.elapsed().as_secs_f64();
        let data = first_elements(&surface, &bases)?.scaled_to(&surface, 0.05, 0.05)?;
        Ok(Self { surface, bases, data, bases_seconds })
    }
}

fn first_elements(s: &SurfaceModel, b: &HolomorphicBases) -> Result<HolomorphicData> {
    let unit = |d: usize| (0..d).map(|i| cr(if i == 0 { 1.0 } else { 0.0 })).collect::<Vec<_>>();
    make_holomorphic_data(s, b, &unit(b.quadratic.len()), &unit(b.one_forms.len()))
}

fn c1(g2: &Genus2) -> Result<(bool, String)> {
    let worst = [0.0, 0.5, 1.0].iter().map(|&t| trivial_residual(&g2.surface, t)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    Ok((worst <= 1e-12, format!("bolza 64 sup residual at t = 0, 0.5, 1: {worst:.3e} (<= 1e-12)")))
}

fn c2(bolza128: &SurfaceModel, g2: &Genus2) -> Result<(bool, String)> {
    let t = torus(64)?;
    let mut torus_worst: f64 = 0.0;
    for seed in 1..=3 {
        torus_worst = torus_worst.max(conformal_identity(&t, &random_quadratic(&t, seed, 0.9)?)?.sup);
    }
    let moderate = conformal_identity(&t, &random_quadratic(&t, 1, 0.5)?)?.sup;
    let coarse = conformal_identity(&g2.surface, &random_quadratic(&g2.surface, 1, 0.9)?)?.sup;
    let fine = conformal_identity(bolza128, &random_quadratic(bolza128, 1, 0.9)?)?.sup;
    let order = observed_order(coarse, fine, g2.surface.spacing(), bolza128.spacing());
    let ok = torus_worst <= 1e-9 && order >= 2.0;
    Ok((
        ok,
        format!(
            "torus 64 max|q|^2 = 0.9: {torus_worst:.3e} (<= 1e-9; at 0.5: {moderate:.3e}); bolza 64 -> 128: {coarse:.3e} -> {fine:.3e}, order {order:.2} (>= 2)"
        ),
    ))
}

fn c3(bolza128: &SurfaceModel) -> Result<(bool, String)> {
    let t = torus(64)?;
    let h = bolza128.spacing();
    let mut ok = true;
    let mut parts = Vec::new();
    for k in 1..=2 {
        let dt = adjointness_defect(&t, k, 1)?;
        let db = adjointness_defect(bolza128, k, 1)?;
        ok &= dt <= 1e-10 && db <= 5e-3 * h * h;
        parts.push(format!("weight {k}: torus {dt:.2e} (<= 1e-10), bolza 128 {:.2e} h^2 (<= 5e-3 h^2)", db / (h * h)));
    }
    Ok((ok, parts.join("; ")))
}

fn c4(g2: &Genus2) -> Result<(bool, String)> {
    let t = torus(64)?;
    let tb = HolomorphicBases::compute(&t, GAP_MIN)?;
    let dims = |b: &HolomorphicBases, tag: OperatorTag| b.spectra.iter().find(|r| r.operator_tag == tag).map(|r| (r.kernel_dim, r.gap_ratio, r.holomorphy_residual));
    let (tk, tkg, _) = dims(&tb, OperatorTag::BochnerOnK).unwrap();
    let (tq, tqg, _) = dims(&tb, OperatorTag::BochnerOnK2).unwrap();
    let (bk, bkg, bkh) = dims(&g2.bases, OperatorTag::BochnerOnK).unwrap();
    let (bq, bqg, bqh) = dims(&g2.bases, OperatorTag::BochnerOnK2).unwrap();
    let gap = [tkg, tqg, bkg, bqg].into_iter().fold(f64::INFINITY, f64::min);
    let ok = (tk, tq, bk, bq) == (1, 1, 2, 3) && bk + bq == 5 && gap >= GAP_MIN;
    Ok((
        ok,
        format!(
            "torus dims {tk}/{tq}, bolza 64 dims {bk}/{bq} (sum {}), smallest gap {gap:.3e} (>= 100); holomorphy residual of bolza kernels {bkh:.1e}/{bqh:.1e} (informational, bases {:.1} s)",
            bk + bq,
            g2.bases_seconds
        ),
    ))
}

fn c5() -> Result<(bool, String)> {
    let s = torus(64)?;
    let settings = NewtonSettings::for_surface(&s);
    let mut obstructed = Vec::new();
    for (tau, beta) in [(0.0, 0.05), (0.1, 0.02), (0.0, 0.2)] {
        let p = ContinuityProblem::new(&s, &constant_data(&s, tau, beta)?)?;
        obstructed.push(continuity_run(&p, &Schedule::default(), &settings, |_| {})?.verdict);
    }
    let all_obstructed = obstructed.iter().all(|v| *v == Verdict::Obstructed);
    let p = ContinuityProblem::new(&s, &constant_data(&s, 0.1, 0.0)?)?;
    let rep = continuity_run(&p, &Schedule::default(), &settings, |_| {})?;
    let flat = rep.final_check.as_ref().and_then(|c| c.flatness).unwrap_or(f64::INFINITY);
    let ok = all_obstructed && rep.verdict == Verdict::Converged && flat <= 1e-8;
    let names: Vec<&str> = obstructed.iter().map(|v| v.name()).collect();
    Ok((ok, format!("beta != 0 verdicts {names:?}; tau = 0.1, beta = 0: {}, flatness {flat:.2e} (<= 1e-8)", rep.verdict.name())))
}

/// Random complex combinations of a fixed family of smooth sections.
struct SmoothFamily {
    members: Vec<SectionField>,
    rng: ChaCha8Rng,
}

impl SmoothFamily {
    fn new(s: &SurfaceModel, w: Weight, seeds: std::ops::Range<u32>, rng_seed: u64) -> Self {
        Self { members: seeds.map(|k| test_section(s, w, k)).collect(), rng: ChaCha8Rng::seed_from_u64(rng_seed) }
    }

    fn draw(&mut self) -> SectionField {
        let first = &self.members[0];
        let mut out = SectionField::zeros(first.weight, first.len());
        for f in &self.members {
            let c = Complex64::new(self.rng.gen_range(-1.0..1.0), self.rng.gen_range(-1.0..1.0));
            out.values.iter_mut().zip(&f.values).for_each(|(o, v)| *o += c * v);
        }
        out
    }
}

fn c6(g2: &Genus2) -> Result<(bool, String)> {
    let s = &g2.surface;
    let p = ContinuityProblem::new(s, &g2.data)?;
    let m = MetricState::background(s);
    let mut forms = SmoothFamily::new(s, Weight::ONE_FORM, 1..7, 6);
    let mut funcs = SmoothFamily::new(s, Weight::FUNCTION, 1..7, 7);
    let mut worst: f64 = 0.0;
    let mut feasible = true;
    for t in [0.3, 0.7, 1.0] {
        let eta = forms.draw();
        let eta = eta.scaled(cr(0.02 / sup_norm(&m, &eta)?));
        let f = funcs.draw().real_parts();
        let fs = f.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let u = Unknowns { eta: eta.values, f: f.iter().map(|x| 0.1 * x / fs).collect(), mu: cr(0.0), nu: 0.0 };
        feasible &= hcsck::moment_maps::constraint_margin(&m, &u.f, &p.q(t, &u.eta)?)? > 0.0;
        for _ in 0..20 {
            let du = Unknowns { eta: forms.draw().values, f: funcs.draw().real_parts(), mu: cr(0.0), nu: 0.0 };
            worst = worst.max(p.jacobian_error(t, &u, &du, 1e-5)?);
        }
    }
    Ok((feasible && worst <= 1e-6, format!("bolza 64, 3 states x 20 directions: max relative error {worst:.3e} (<= 1e-6), states feasible: {feasible}")))
}

fn c7(g2: &Genus2) -> Result<((bool, String), ContinuityReport)> {
    let s = &g2.surface;
    let p = ContinuityProblem::new(s, &g2.data)?;
    let start = Instant::now();
    let rep = continuity_run(&p, &Schedule::default(), &NewtonSettings::for_surface(s), |_| {})?;
    let secs = start.elapsed().as_secs_f64();
    let last = rep.records.last();
    let reached = rep.verdict == Verdict::Converged && last.is_some_and(|r| r.t == 1.0);
    let residual = last.map_or(f64::INFINITY, |r| r.residual_sup);
    let min_margin = rep.records.iter().map(|r| r.constraint_margin).fold(f64::INFINITY, f64::min);
    let min_slack = rep.records.iter().map(|r| r.c0.upper.min(r.c0.lower)).fold(f64::INFINITY, f64::min);
    let (original, fin_slack) = rep.final_check.as_ref().map_or((f64::INFINITY, f64::NEG_INFINITY), |c| (c.original.sup(), c.c0.upper.min(c.c0.lower)));
    let ok = reached && residual <= 1e-8 && original <= 1e-5 && min_margin > 0.0 && min_slack.min(fin_slack) >= -1e-3;
    let line = format!(
        "{} after {} steps in {secs:.1} s; residual {residual:.2e} (<= 1e-8), original system {original:.2e} (<= 1e-5), min margin {min_margin:.4} (> 0), min C0 slack {:.3} (>= -1e-3)",
        rep.verdict.name(),
        rep.records.len(),
        min_slack.min(fin_slack)
    );
    Ok(((ok, line), rep))
}

fn c8(g2: &Genus2) -> Result<(bool, String)> {
    let s = &g2.surface;
    let m = MetricState::background(s);
    let n = s.len();
    let tau = SectionField::zeros(Weight::QUADRATIC, n);
    let eta_sup = |beta: SectionField| -> Result<f64> {
        let p = ContinuityProblem::new(s, &HolomorphicData::from_fields(s, tau.clone(), beta)?)?;
        let sol = p.complex_mm_inner_solve(&vec![0.0; n], 1.0, &vec![cr(0.0); n], 1e-10, 200)?;
        sup_norm(&m, &SectionField::new(Weight::ONE_FORM, sol.eta))
    };
    let full = eta_sup(g2.data.beta.clone())?;
    let half = eta_sup(g2.data.beta.scaled(cr(0.5)))?;
    let ratio = full / half;
    Ok(((ratio - 2.0).abs() <= 0.2, format!("bolza 64, tau = 0, f = 0: |eta(beta)| / |eta(beta/2)| = {ratio:.4} (2 within 10%)")))
}

fn c9(g2: &Genus2, solved: &ContinuityReport) -> Result<(bool, String)> {
    let s = &g2.surface;
    let m = MetricState::background(s);
    let p = ContinuityProblem::new(s, &g2.data)?;
    let Some(state) = &solved.final_state else {
        return Ok((false, "no solved state to perturb".into()));
    };
    let settings = NewtonSettings { tol_residual: 1e-10, ..NewtonSettings::for_surface(s) };
    let reference = p.newton_solve(1.0, state.unknowns(), &settings)?.unknowns;
    let mut worst: f64 = 0.0;
    for seed in [3, 5] {
        let bump = test_section(s, Weight::FUNCTION, seed).real_parts();
        let b = bump.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for sign in [1.0, -1.0] {
            let mut init = reference.clone();
            init.f.iter_mut().zip(&bump).for_each(|(f, x)| *f += sign * 0.1 * x / b);
            let u = p.newton_solve(1.0, init, &settings)?.unknowns;
            let df = u.f.iter().zip(&reference.f).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            let de = SectionField::new(Weight::ONE_FORM, u.eta.iter().zip(&reference.eta).map(|(x, y)| x - y).collect());
            worst = worst.max(df).max(sup_norm(&m, &de)?);
        }
    }
    Ok((worst <= 1e-7, format!("bolza 64 at t = 1, f +- 0.1 smooth bumps x 4: max state difference {worst:.2e} (<= 1e-7)")))
}

fn report(n: usize, outcome: Result<(bool, String)>, all: &mut bool, clock: &mut Instant) {
    let (ok, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    *all &= ok;
    println!("criterion {n}: {} | {detail} [{:.1} s]", if ok { "PASS" } else { "FAIL" }, clock.elapsed().as_secs_f64());
    *clock = Instant::now();
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let start = Instant::now();
    let mut all = true;
    let mut clock = Instant::now();
    let g2 = match Genus2::new() {
        Ok(g) => g,
        Err(e) => {
            println!("criterion 1-9: FAIL | bolza 64 setup: {e}");
            return ExitCode::FAILURE;
        }
    };
    report(1, c1(&g2), &mut all, &mut clock);
    match build_surface(SurfaceKind::Bolza, 128) {
        Ok(b) => {
            report(2, c2(&b, &g2), &mut all, &mut clock);
            report(3, c3(&b), &mut all, &mut clock);
        }
        Err(e) => {
            report(2, Ok((false, format!("bolza 128 setup: {e}"))), &mut all, &mut clock);
            report(3, Ok((false, format!("bolza 128 setup: {e}"))), &mut all, &mut clock);
        }
    }
    report(4, c4(&g2), &mut all, &mut clock);
    report(5, c5(), &mut all, &mut clock);
    report(6, c6(&g2), &mut all, &mut clock);
    let solved = c7(&g2);
    let (c7_line, rep) = match solved {
        Ok((line, rep)) => (Ok(line), Some(rep)),
        Err(e) => (Err(e), None),
    };
    report(7, c7_line, &mut all, &mut clock);
    report(8, c8(&g2), &mut all, &mut clock);
    report(9, rep.as_ref().map_or_else(|| Ok((false, "end-to-end run failed".into())), |r| c9(&g2, r)), &mut all, &mut clock);
    println!("acceptance: {} in {:.1} s", if all { "all criteria pass" } else { "some criteria fail" }, start.elapsed().as_secs_f64());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
