//! `solve`, `sweep`, `spectrum` and `report`.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use hcsck::continuity::{self, FinalCheck, RejectedStep, StepRecord, Verdict};
use hcsck::holomorphic::{self, HolomorphicBases, HolomorphicData, OperatorTag, SpectrumReport};
use hcsck::newton::ContinuityProblem;
use hcsck::surface::SurfaceDescription;
use hcsck::SurfaceModel;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{RawConfig, RunConfig};
use crate::output::{self, OutputLock};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceSummary {
    pub description: SurfaceDescription,
    pub samples: usize,
    pub genus: usize,
    pub area: f64,
}

impl SurfaceSummary {
    pub fn of(s: &SurfaceModel) -> Self {
        Self { description: s.describe(), samples: s.len(), genus: s.genus(), area: s.area() }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DataSummary {
    pub tau_norm_c0: f64,
    pub beta_norm_c1: f64,
    pub tau_residual: f64,
    pub beta_residual: f64,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Timing {
    pub bases_seconds: f64,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub report: String,
    pub config: BTreeMap<String, String>,
    pub surface: SurfaceSummary,
    pub data: DataSummary,
    pub spectra: Vec<SpectrumReport>,
    pub resumed_from: Option<f64>,
    pub records: Vec<StepRecord>,
    pub rejected: Vec<RejectedStep>,
    pub final_check: Option<FinalCheck>,
    pub verdict: Verdict,
    pub exit_code: i32,
    pub message: String,
    pub timing: Timing,
}

/// A surface with its kernel bases.
pub struct Prepared {
    pub surface: SurfaceModel,
    pub bases: HolomorphicBases,
    pub bases_seconds: f64,
}

impl Prepared {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let start = Instant::now();
        let surface = SurfaceModel::new(cfg.surface_kind(), cfg.surface.grid_n)?;
        let bases = HolomorphicBases::compute(&surface, cfg.gap_min)?;
        Ok(Self { surface, bases, bases_seconds: start.elapsed().as_secs_f64() })
    }
}

fn spec_or_default(spec: &[Complex64], dim: usize, norm: Option<f64>) -> Vec<Complex64> {
    if !spec.is_empty() {
        return spec.to_vec();
    }
    let mut v = vec![Complex64::new(0.0, 0.0); dim];
    if norm.is_some() && dim > 0 {
        v[0] = Complex64::new(1.0, 0.0);
    }
    v
}

/// `τ` and `β` from the coefficient lists, rescaled to `data.tau_c0` and
/// `data.beta_c1` when those are set. An empty list with a norm set means
/// the first basis element.
pub fn build_data(cfg: &RunConfig, p: &Prepared) -> Result<HolomorphicData> {
    let tau = spec_or_default(&cfg.tau_spec, p.bases.quadratic.len(), cfg.tau_c0);
    let beta = spec_or_default(&cfg.beta_spec, p.bases.one_forms.len(), cfg.beta_c1);
    let d = holomorphic::make_holomorphic_data(&p.surface, &p.bases, &tau, &beta)?;
    if cfg.tau_c0.is_none() && cfg.beta_c1.is_none() {
        return Ok(d);
    }
    Ok(d.scaled_to(&p.surface, cfg.tau_c0.unwrap_or(d.tau_norm_c0), cfg.beta_c1.unwrap_or(d.beta_norm_c1))?)
}

pub fn check_thresholds(cfg: &RunConfig, d: &HolomorphicData) -> Result<()> {
    let slack = 1e-12;
    if d.tau_norm_c0 > cfg.threshold_tau_c0 * (1.0 + slack) {
        bail!("|tau|_C0 = {:.4e} exceeds thresholds.tau_c0 = {} (use --force to run anyway)", d.tau_norm_c0, cfg.threshold_tau_c0);
    }
    if d.beta_norm_c1 > cfg.threshold_beta_c1 * (1.0 + slack) {
        bail!("|beta|_C1 = {:.4e} exceeds thresholds.beta_c1 = {} (use --force to run anyway)", d.beta_norm_c1, cfg.threshold_beta_c1);
    }
    Ok(())
}

/// Runs the continuity path and writes the report, trace, final fields and
/// checkpoints into `dir`. The caller holds the lock on `dir`.
pub fn run_solve(cfg: &RunConfig, p: &Prepared, data: &HolomorphicData, dir: &Path, resume: Option<&Path>) -> Result<SolveReport> {
    let start = Instant::now();
    let echo = cfg.echo();
    let surface = &p.surface;
    let problem = ContinuityProblem::new(surface, data)?;
    let start_state = resume.map(|r| output::read_checkpoint(r, &problem, &echo)).transpose()?;
    let resumed_from = start_state.as_ref().map(|s| s.t);
    let checkpoint_dir = dir.join("checkpoint");
    let failure: RefCell<Option<anyhow::Error>> = RefCell::new(None);
    let mut observer = |s: &continuity::ContinuityState| {
        if failure.borrow().is_none() {
            if let Err(e) = output::write_checkpoint(&checkpoint_dir, surface, s, &echo) {
                *failure.borrow_mut() = Some(e);
            }
        }
    };
    let rep = continuity::continuity_run_from(&problem, &cfg.schedule, &cfg.newton, start_state, &mut observer)?;
    if let Some(e) = failure.into_inner() {
        return Err(e.context("writing checkpoint"));
    }
    if let Some(state) = &rep.final_state {
        output::write_dump(&dir.join("f.dump"), surface, &state.f_field())?;
        output::write_dump(&dir.join("q.dump"), surface, &state.q)?;
        output::write_dump(&dir.join("eta.dump"), surface, &state.eta)?;
    }
    output::write_trace(&dir.join("trace.csv"), &rep.records)?;
    let report = SolveReport {
        report: "solve".into(),
        config: echo,
        surface: SurfaceSummary::of(surface),
        data: DataSummary {
            tau_norm_c0: data.tau_norm_c0,
            beta_norm_c1: data.beta_norm_c1,
            tau_residual: data.tau_residual,
            beta_residual: data.beta_residual,
        },
        spectra: p.bases.spectra.clone(),
        resumed_from,
        records: rep.records,
        rejected: rep.rejected,
        final_check: rep.final_check,
        verdict: rep.verdict,
        exit_code: rep.verdict.exit_code(),
        message: rep.message,
        timing: Timing { bases_seconds: p.bases_seconds, solve_seconds: start.elapsed().as_secs_f64() },
    };
    output::write_json(&dir.join("report.json"), &report)?;
    Ok(report)
}

pub fn cmd_solve(cfg: &RunConfig, force: bool, resume: Option<&Path>) -> Result<i32> {
    let _lock = OutputLock::acquire(&cfg.output_dir)?;
    let p = Prepared::new(cfg)?;
    let data = build_data(cfg, &p)?;
    if !force {
        check_thresholds(cfg, &data)?;
    }
    let rep = run_solve(cfg, &p, &data, &cfg.output_dir, resume)?;
    println!(
        "{}: {} (t = {}, {} steps, {} rejected) -> {}",
        rep.verdict.name(),
        rep.message,
        rep.records.last().map_or(0.0, |r| r.t),
        rep.records.len(),
        rep.rejected.len(),
        cfg.output_dir.join("report.json").display()
    );
    Ok(rep.exit_code)
}

/// `a:b:n` (inclusive linear range) or a list separated by `;`, or by `,`
/// when there is no `;`.
pub fn parse_values(s: &str) -> Result<Vec<String>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let a: f64 = parts[0].trim().parse().map_err(|_| anyhow!("bad range start `{}`", parts[0]))?;
        let b: f64 = parts[1].trim().parse().map_err(|_| anyhow!("bad range end `{}`", parts[1]))?;
        let n: usize = parts[2].trim().parse().map_err(|_| anyhow!("bad range count `{}`", parts[2]))?;
        if n < 2 {
            bail!("a range needs at least two values");
        }
        return Ok((0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).to_string()).collect());
    }
    let sep = if s.contains(';') { ';' } else { ',' };
    let v: Vec<String> = s.split(sep).map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect();
    if v.is_empty() {
        bail!("no sweep values given");
    }
    Ok(v)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    pub dir: String,
    pub verdict: Option<Verdict>,
    pub exit_code: Option<i32>,
    pub last_t: f64,
    pub tau_norm_c0: f64,
    pub beta_norm_c1: f64,
    pub min_constraint_margin: Option<f64>,
    pub final_residual_sup: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub report: String,
    pub config: BTreeMap<String, String>,
    pub parameter: String,
    pub runs: Vec<SweepRow>,
    pub timing_seconds: f64,
}

#[derive(Debug, Serialize)]
struct SweepCsvRow<'a> {
    value: &'a str,
    verdict: &'a str,
    last_t: f64,
    tau_norm_c0: f64,
    beta_norm_c1: f64,
    min_constraint_margin: String,
    final_residual_sup: String,
}

pub fn cmd_sweep(raw: &RawConfig, parameter: &str, values: &str, force: bool) -> Result<i32> {
    let start = Instant::now();
    let base = RunConfig::resolve(raw)?;
    let values = parse_values(values)?;
    let _lock = OutputLock::acquire(&base.output_dir)?;
    let mut cache: Option<(SurfaceDescription, u64, Prepared)> = None;
    let mut runs = Vec::new();
    for (i, v) in values.iter().enumerate() {
        let mut r = raw.clone();
        r.set(parameter, v)?;
        r.set("output.dir", &base.output_dir.display().to_string())?;
        let cfg = RunConfig::resolve(&r).with_context(|| format!("sweep value `{v}`"))?;
        let key = (cfg.surface.clone(), cfg.gap_min.to_bits());
        if cache.as_ref().map_or(true, |c| (c.0.clone(), c.1) != key) {
            cache = Some((key.0, key.1, Prepared::new(&cfg)?));
        }
        let p = &cache.as_ref().expect("filled above").2;
        let data = build_data(&cfg, p)?;
        let dir = base.output_dir.join(format!("run_{i:03}"));
        std::fs::create_dir_all(&dir)?;
        let mut row = SweepRow {
            value: v.clone(),
            dir: dir.display().to_string(),
            verdict: None,
            exit_code: None,
            last_t: 0.0,
            tau_norm_c0: data.tau_norm_c0,
            beta_norm_c1: data.beta_norm_c1,
            min_constraint_margin: None,
            final_residual_sup: None,
            note: None,
        };
        let outcome = if force { Ok(()) } else { check_thresholds(&cfg, &data) };
        match outcome.and_then(|_| run_solve(&cfg, p, &data, &dir, None)) {
            Ok(rep) => {
                row.verdict = Some(rep.verdict);
                row.exit_code = Some(rep.exit_code);
                row.last_t = rep.records.last().map_or(0.0, |r| r.t);
                row.min_constraint_margin = rep.records.iter().map(|r| r.constraint_margin).reduce(f64::min);
                row.final_residual_sup = rep.records.last().map(|r| r.residual_sup);
                row.note = Some(rep.message);
            }
            Err(e) => row.note = Some(format!("{e:#}")),
        }
        eprintln!("{parameter} = {v}: {}", row.verdict.map_or("skipped", |v| v.name()));
        runs.push(row);
    }
    let report = SweepReport { report: "sweep".into(), config: base.echo(), parameter: parameter.to_string(), runs, timing_seconds: start.elapsed().as_secs_f64() };
    output::write_json(&base.output_dir.join("sweep.json"), &report)?;
    output::write_atomic(&base.output_dir.join("sweep.csv"), |w| {
        let mut csv = csv::Writer::from_writer(w);
        let opt = |x: Option<f64>| x.map_or(String::new(), |x| x.to_string());
        for r in &report.runs {
            csv.serialize(SweepCsvRow {
                value: &r.value,
                verdict: r.verdict.map_or("skipped", |v| v.name()),
                last_t: r.last_t,
                tau_norm_c0: r.tau_norm_c0,
                beta_norm_c1: r.beta_norm_c1,
                min_constraint_margin: opt(r.min_constraint_margin),
                final_residual_sup: opt(r.final_residual_sup),
            })?;
        }
        csv.flush()?;
        Ok(())
    })?;
    println!("{} runs -> {}", report.runs.len(), base.output_dir.join("sweep.json").display());
    Ok(0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumOutput {
    pub report: String,
    pub config: BTreeMap<String, String>,
    pub spectra: Vec<SpectrumReport>,
    pub expected_kernel_dims: Vec<usize>,
    pub passed: bool,
    pub timing_seconds: f64,
}

pub fn cmd_spectrum(cfg: &RunConfig, tags: &[String]) -> Result<i32> {
    let start = Instant::now();
    let surface = SurfaceModel::new(cfg.surface_kind(), cfg.surface.grid_n)?;
    let g = surface.genus();
    let tags: Vec<OperatorTag> = if tags.is_empty() {
        vec![OperatorTag::BochnerOnK, OperatorTag::BochnerOnK2, OperatorTag::Bochner]
    } else {
        tags.iter().map(|t| OperatorTag::parse(t)).collect::<hcsck::Result<_>>()?
    };
    let mut spectra = Vec::new();
    let mut expected = Vec::new();
    for tag in tags {
        let dim = match (tag, g) {
            (OperatorTag::BochnerOnK, g) => g,
            (OperatorTag::BochnerOnK2, 1) => 1,
            (OperatorTag::BochnerOnK2, g) => 3 * g - 3,
            (OperatorTag::Bochner, 1) => 1,
            (OperatorTag::Bochner, _) => 0,
        };
        let k = cfg.spectrum_count.unwrap_or(dim + 3).max(dim + 1);
        let (rep, _) = holomorphic::kernel_spectrum(&surface, tag, k, cfg.gap_min)?;
        spectra.push(rep);
        expected.push(dim);
    }
    let passed = spectra.iter().zip(&expected).all(|(s, &d)| s.kernel_dim == d && (d == 0 || s.gap_ratio >= cfg.gap_min));
    let out = SpectrumOutput { report: "spectrum".into(), config: cfg.echo(), spectra, expected_kernel_dims: expected, passed, timing_seconds: start.elapsed().as_secs_f64() };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(if passed { 0 } else { 1 })
}

/// Human-readable summary of a JSON report written by another command.
pub fn cmd_report(path: &PathBuf) -> Result<i32> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    match v.get("report").and_then(|r| r.as_str()) {
        Some("solve") => {
            let r: SolveReport = serde_json::from_value(v)?;
            print_solve(&r);
        }
        Some("sweep") => {
            let r: SweepReport = serde_json::from_value(v)?;
            println!("sweep over {} ({} runs)", r.parameter, r.runs.len());
            println!("{:>14} {:>15} {:>7} {:>12} {:>12}", "value", "verdict", "last t", "min margin", "residual");
            for row in &r.runs {
                println!(
                    "{:>14} {:>15} {:>7.3} {:>12} {:>12}",
                    row.value,
                    row.verdict.map_or("skipped", |v| v.name()),
                    row.last_t,
                    row.min_constraint_margin.map_or("-".into(), |m| format!("{m:.6}")),
                    row.final_residual_sup.map_or("-".into(), |m| format!("{m:.3e}"))
                );
            }
        }
        _ => println!("{}", serde_json::to_string_pretty(&v)?),
    }
    Ok(0)
}

fn print_solve(r: &SolveReport) {
    let d = &r.surface.description;
    println!("surface   {} grid {} ({} samples, genus {})", d.kind, d.grid_n, r.surface.samples, r.surface.genus);
    println!("data      |tau|_C0 = {:.4e}  |beta|_C1 = {:.4e}", r.data.tau_norm_c0, r.data.beta_norm_c1);
    println!("verdict   {} (exit {}): {}", r.verdict.name(), r.exit_code, r.message);
    println!("{:>8} {:>6} {:>12} {:>12} {:>12} {:>12}", "t", "iters", "residual", "margin", "upper", "lower");
    for s in &r.records {
        println!("{:>8.4} {:>6} {:>12.4e} {:>12.8} {:>12.4e} {:>12.4e}", s.t, s.newton_iters, s.residual_sup, s.constraint_margin, s.c0.upper, s.c0.lower);
    }
    for s in &r.rejected {
        println!("rejected  t = {:.4} (dt {:.4}): {}", s.t, s.dt, s.reason);
    }
    if let Some(f) = &r.final_check {
        println!("original  sup residual {:.4e} (complex {:.4e}, real {:.4e})", f.original.sup(), f.original.complex_sup, f.original.real_sup);
        println!("areas     background {:.6}  e^f {:.6}  original {:.6}", f.background_area, f.conformal_area, f.original_area);
        if let Some(fl) = f.flatness {
            println!("flatness  {fl:.3e}");
        }
    }
}
