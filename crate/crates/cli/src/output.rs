//! Output directory handling: the lock file, field dumps, CSV traces,
//! JSON reports and checkpoints.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hcsck::continuity::{ContinuityState, Monitors, StepRecord};
use hcsck::field::SectionField;
use hcsck::newton::{ContinuityProblem, Unknowns};
use hcsck::SurfaceModel;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const LOCK_NAME: &str = ".hcsck.lock";

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                let owner = fs::read_to_string(&path).unwrap_or_default();
                bail!("{} is locked by process {} (delete {} if that run is gone)", dir.display(), owner.trim(), path.display())
            }
            Err(e) => Err(e).with_context(|| format!("creating {}", path.display())),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Writes through a temporary file so readers never see a partial file.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?);
        body(&mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

pub fn write_dump(path: &Path, surface: &SurfaceModel, field: &SectionField) -> Result<()> {
    write_atomic(path, |w| {
        field.write_dump(w, (surface.grid_n, surface.grid_n), surface.lattice())?;
        Ok(())
    })
}

/// Reads a dump and reorders it to the surface's sample order.
pub fn read_dump(path: &Path, surface: &SurfaceModel) -> Result<SectionField> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let dump = SectionField::read_dump(BufReader::new(f))?;
    let lattice = surface.lattice();
    if dump.lattice.len() != lattice.len() {
        bail!("{} has {} samples, the surface has {}", path.display(), dump.lattice.len(), lattice.len());
    }
    let index: std::collections::HashMap<(i32, i32), usize> = dump.lattice.iter().enumerate().map(|(i, &ij)| (ij, i)).collect();
    let mut values = Vec::with_capacity(lattice.len());
    for ij in lattice {
        match index.get(ij) {
            Some(&i) => values.push(dump.field.values[i]),
            None => bail!("{} lacks sample {:?}", path.display(), ij),
        }
    }
    Ok(SectionField::new(dump.field.weight, values))
}

#[derive(Debug, Serialize)]
struct TraceRow {
    t: f64,
    residual_sup: f64,
    constraint_margin: f64,
    upper_slack: f64,
    lower_slack: f64,
    iters: usize,
}

pub fn write_trace(path: &Path, records: &[StepRecord]) -> Result<()> {
    write_atomic(path, |w| {
        let mut csv = csv::Writer::from_writer(w);
        for r in records {
            csv.serialize(TraceRow {
                t: r.t,
                residual_sup: r.residual_sup,
                constraint_margin: r.constraint_margin,
                upper_slack: r.c0.upper,
                lower_slack: r.c0.lower,
                iters: r.newton_iters,
            })?;
        }
        csv.flush()?;
        Ok(())
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointMeta {
    t: f64,
    mu: Complex64,
    nu: f64,
    newton_iters: usize,
    monitors: Monitors,
    config: std::collections::BTreeMap<String, String>,
}

/// Writes `eta.dump`, `f.dump`, `q.dump` and `state.json` into `dir`.
pub fn write_checkpoint(dir: &Path, surface: &SurfaceModel, state: &ContinuityState, config: &std::collections::BTreeMap<String, String>) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_dump(&dir.join("eta.dump"), surface, &state.eta)?;
    write_dump(&dir.join("f.dump"), surface, &state.f_field())?;
    write_dump(&dir.join("q.dump"), surface, &state.q)?;
    let meta = CheckpointMeta { t: state.t, mu: state.mu, nu: state.nu, newton_iters: state.newton_iters, monitors: state.monitors, config: config.clone() };
    write_json(&dir.join("state.json"), &meta)
}

/// Restores a checkpointed state; the stored config must match `config`
/// apart from the output directory.
pub fn read_checkpoint(dir: &Path, problem: &ContinuityProblem, config: &std::collections::BTreeMap<String, String>) -> Result<ContinuityState> {
    let meta: CheckpointMeta = serde_json::from_reader(BufReader::new(File::open(dir.join("state.json")).with_context(|| format!("opening checkpoint in {}", dir.display()))?))?;
    let differs: Vec<&String> = config
        .iter()
        .filter(|(k, v)| k.as_str() != "output.dir" && meta.config.get(*k) != Some(v))
        .map(|(k, _)| k)
        .collect();
    if !differs.is_empty() {
        bail!("checkpoint was written with a different configuration ({})", differs.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "));
    }
    let surface = problem.surface();
    let eta = read_dump(&dir.join("eta.dump"), surface)?;
    let f = read_dump(&dir.join("f.dump"), surface)?.real_parts();
    let u = Unknowns { eta: eta.values, f, mu: meta.mu, nu: meta.nu };
    Ok(ContinuityState::new(problem, meta.t, u, meta.newton_iters)?)
}
