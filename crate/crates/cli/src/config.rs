//! Run configuration: flat dotted keys from a TOML file, overridden by
//! `--set key=value` pairs on the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use hcsck::continuity::Schedule;
use hcsck::newton::{JacobianMode, NewtonSettings};
use hcsck::surface::{SurfaceDescription, SurfaceKind};
use num_complex::Complex64;

/// Every accepted key with its default. `auto` defers to the surface.
pub const KEYS: &[(&str, &str)] = &[
    ("surface.kind", "bolza"),
    ("surface.grid_n", "64"),
    ("surface.modulus", "0+1i"),
    ("data.tau_spec", ""),
    ("data.beta_spec", ""),
    ("data.tau_c0", "none"),
    ("data.beta_c1", "none"),
    ("newton.tol_residual", "auto"),
    ("newton.max_iters", "30"),
    ("newton.damping", "0.5"),
    ("newton.min_step", "0.0009765625"),
    ("newton.jacobian_mode", "analytic"),
    ("newton.linear_tol", "1e-12"),
    ("continuity.initial_step", "0.1"),
    ("continuity.min_step", "0.001"),
    ("continuity.max_step", "0.25"),
    ("thresholds.tau_c0", "0.1"),
    ("thresholds.beta_c1", "0.1"),
    ("spectrum.gap_min", "100"),
    ("spectrum.count", "auto"),
    ("verify.grids", "64,128"),
    ("verify.q_amplitude", "0.5"),
    ("verify.curvature_scale", "1"),
    ("output.dir", "hcsck-out"),
];

/// Raw key/value pairs before typing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn defaults() -> Self {
        Self { values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect() }
    }

    /// Defaults, then the file (if any), then the overrides.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = Self::defaults();
        if let Some(p) = file {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            cfg.merge_toml(&text).with_context(|| format!("in config {}", p.display()))?;
        }
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| anyhow!("override `{o}` is not of the form key=value"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => bail!("unknown configuration key `{key}`"),
        }
    }

    pub fn merge_toml(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text.parse()?;
        let mut flat = Vec::new();
        flatten("", &toml::Value::Table(table), &mut flat)?;
        for (k, v) in flat {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }
}

fn scalar(v: &toml::Value) -> Result<String> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(a) => a.iter().map(scalar).collect::<Result<Vec<_>>>()?.join(","),
        other => bail!("unsupported value {other}"),
    })
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<(String, String)>) -> Result<()> {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out)?;
            }
            Ok(())
        }
        other => {
            out.push((prefix.to_string(), scalar(other)?));
            Ok(())
        }
    }
}

/// Parses `1`, `-0.5i`, `0.2+0.1i`, ...
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    Complex64::from_str(&t).map_err(|_| anyhow!("bad complex number `{s}`"))
}

pub fn parse_complex_list(s: &str) -> Result<Vec<Complex64>> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(parse_complex).collect()
}

fn parse<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| anyhow!("bad value `{s}` for `{key}`"))
}

fn optional(key: &str, s: &str) -> Result<Option<f64>> {
    match s.trim() {
        "" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn format_complex(c: Complex64) -> String {
    format!("{}{:+}i", c.re, c.im)
}

/// The typed configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub surface: SurfaceDescription,
    pub tau_spec: Vec<Complex64>,
    pub beta_spec: Vec<Complex64>,
    pub tau_c0: Option<f64>,
    pub beta_c1: Option<f64>,
    pub newton: NewtonSettings,
    pub schedule: Schedule,
    pub threshold_tau_c0: f64,
    pub threshold_beta_c1: f64,
    pub gap_min: f64,
    pub spectrum_count: Option<usize>,
    pub verify_grids: Vec<usize>,
    pub verify_q_amplitude: f64,
    pub verify_curvature_scale: f64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn resolve(raw: &RawConfig) -> Result<Self> {
        let kind = raw.get("surface.kind").trim().to_string();
        let grid_n = parse("surface.grid_n", raw.get("surface.grid_n"))?;
        let modulus = parse_complex(raw.get("surface.modulus"))?;
        let is_torus = match kind.as_str() {
            "torus" => true,
            "bolza" => false,
            other => bail!("unknown surface kind `{other}`"),
        };
        let surface = SurfaceDescription {
            kind: kind.clone(),
            grid_n,
            modulus_re: is_torus.then_some(modulus.re),
            modulus_im: is_torus.then_some(modulus.im),
        };
        let (genus, dims) = if is_torus { (1, (1, 1)) } else { (2, (2, 3)) };
        let tau_spec = parse_complex_list(raw.get("data.tau_spec"))?;
        let beta_spec = parse_complex_list(raw.get("data.beta_spec"))?;
        for (name, spec, dim) in [("data.tau_spec", &tau_spec, dims.1), ("data.beta_spec", &beta_spec, dims.0)] {
            if !spec.is_empty() && spec.len() != dim {
                bail!("`{name}` has {} coefficients but the kernel has dimension {dim} in genus {genus}", spec.len());
            }
        }
        let tol = match raw.get("newton.tol_residual").trim() {
            "auto" => if is_torus { 1e-10 } else { 1e-8 },
            v => parse("newton.tol_residual", v)?,
        };
        let jacobian_mode = match raw.get("newton.jacobian_mode").trim() {
            "analytic" => JacobianMode::Analytic,
            "finite_difference_check" => JacobianMode::FiniteDifferenceCheck,
            other => bail!("unknown jacobian mode `{other}`"),
        };
        let newton = NewtonSettings {
            tol_residual: tol,
            max_iters: parse("newton.max_iters", raw.get("newton.max_iters"))?,
            damping: parse("newton.damping", raw.get("newton.damping"))?,
            min_step: parse("newton.min_step", raw.get("newton.min_step"))?,
            jacobian_mode,
            linear_tol: parse("newton.linear_tol", raw.get("newton.linear_tol"))?,
        };
        newton.validate()?;
        let schedule = Schedule {
            initial_step: parse("continuity.initial_step", raw.get("continuity.initial_step"))?,
            min_step: parse("continuity.min_step", raw.get("continuity.min_step"))?,
            max_step: parse("continuity.max_step", raw.get("continuity.max_step"))?,
            ..Schedule::default()
        };
        schedule.validate()?;
        let positive = |key: &str| -> Result<f64> {
            let v: f64 = parse(key, raw.get(key))?;
            if v > 0.0 {
                Ok(v)
            } else {
                bail!("`{key}` must be positive")
            }
        };
        let verify_grids = raw
            .get("verify.grids")
            .split(',')
            .map(|g| parse::<usize>("verify.grids", g))
            .collect::<Result<Vec<_>>>()?;
        if verify_grids.len() != 2 || verify_grids[0] >= verify_grids[1] {
            bail!("`verify.grids` must list a coarse and a fine grid");
        }
        let spectrum_count = match raw.get("spectrum.count").trim() {
            "auto" => None,
            v => Some(parse("spectrum.count", v)?),
        };
        let cfg = Self {
            surface,
            tau_spec,
            beta_spec,
            tau_c0: optional("data.tau_c0", raw.get("data.tau_c0"))?,
            beta_c1: optional("data.beta_c1", raw.get("data.beta_c1"))?,
            newton,
            schedule,
            threshold_tau_c0: positive("thresholds.tau_c0")?,
            threshold_beta_c1: positive("thresholds.beta_c1")?,
            gap_min: positive("spectrum.gap_min")?,
            spectrum_count,
            verify_grids,
            verify_q_amplitude: positive("verify.q_amplitude")?,
            verify_curvature_scale: positive("verify.curvature_scale")?,
            output_dir: PathBuf::from(raw.get("output.dir").trim()),
        };
        if cfg.verify_q_amplitude >= 1.0 {
            bail!("`verify.q_amplitude` must stay below 1");
        }
        cfg.surface.kind().map_err(|e| anyhow!("{e}"))?;
        Ok(cfg)
    }

    pub fn surface_kind(&self) -> SurfaceKind {
        self.surface.kind().expect("validated at resolve time")
    }

    pub fn is_torus(&self) -> bool {
        self.surface.kind == "torus"
    }

    /// The fully resolved configuration as canonical key/value pairs.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let list = |v: &[Complex64]| v.iter().map(|c| format_complex(*c)).collect::<Vec<_>>().join(",");
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| x.to_string());
        let modulus = Complex64::new(self.surface.modulus_re.unwrap_or(0.0), self.surface.modulus_im.unwrap_or(1.0));
        let mode = match self.newton.jacobian_mode {
            JacobianMode::Analytic => "analytic",
            JacobianMode::FiniteDifferenceCheck => "finite_difference_check",
        };
        let pairs: Vec<(&str, String)> = vec![
            ("surface.kind", self.surface.kind.clone()),
            ("surface.grid_n", self.surface.grid_n.to_string()),
            ("surface.modulus", format_complex(modulus)),
            ("data.tau_spec", list(&self.tau_spec)),
            ("data.beta_spec", list(&self.beta_spec)),
            ("data.tau_c0", opt(self.tau_c0)),
            ("data.beta_c1", opt(self.beta_c1)),
            ("newton.tol_residual", self.newton.tol_residual.to_string()),
            ("newton.max_iters", self.newton.max_iters.to_string()),
            ("newton.damping", self.newton.damping.to_string()),
            ("newton.min_step", self.newton.min_step.to_string()),
            ("newton.jacobian_mode", mode.to_string()),
            ("newton.linear_tol", self.newton.linear_tol.to_string()),
            ("continuity.initial_step", self.schedule.initial_step.to_string()),
            ("continuity.min_step", self.schedule.min_step.to_string()),
            ("continuity.max_step", self.schedule.max_step.to_string()),
            ("thresholds.tau_c0", self.threshold_tau_c0.to_string()),
            ("thresholds.beta_c1", self.threshold_beta_c1.to_string()),
            ("spectrum.gap_min", self.gap_min.to_string()),
            ("spectrum.count", self.spectrum_count.map_or("auto".to_string(), |c| c.to_string())),
            ("verify.grids", self.verify_grids.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(",")),
            ("verify.q_amplitude", self.verify_q_amplitude.to_string()),
            ("verify.curvature_scale", self.verify_curvature_scale.to_string()),
            ("output.dir", self.output_dir.display().to_string()),
        ];
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_resolves_to_defaults() {
        let cfg = RunConfig::resolve(&RawConfig::load(None, &[]).unwrap()).unwrap();
        assert_eq!(cfg.surface.kind, "bolza");
        assert_eq!(cfg.newton.tol_residual, 1e-8);
        assert_eq!(cfg.threshold_tau_c0, 0.1);
        assert_eq!(cfg.echo().len(), KEYS.len());
    }

    #[test]
    fn overrides_beat_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "surface.kind = \"torus\"\nsurface.grid_n = 32\n[data]\ntau_spec = [\"0.1+0.2i\"]\n").unwrap();
        let raw = RawConfig::load(Some(&p), &["surface.grid_n=48".into()]).unwrap();
        let cfg = RunConfig::resolve(&raw).unwrap();
        assert_eq!(cfg.surface.grid_n, 48);
        assert!(cfg.is_torus());
        assert_eq!(cfg.tau_spec, vec![Complex64::new(0.1, 0.2)]);
        assert_eq!(cfg.newton.tol_residual, 1e-10);
    }

    #[test]
    fn echo_round_trips() {
        let raw = RawConfig::load(None, &["data.tau_spec=1,0.5i,-2".into(), "newton.damping=0.25".into()]).unwrap();
        let cfg = RunConfig::resolve(&raw).unwrap();
        let mut again = RawConfig::defaults();
        for (k, v) in cfg.echo() {
            again.set(&k, &v).unwrap();
        }
        assert_eq!(RunConfig::resolve(&again).unwrap().echo(), cfg.echo());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RawConfig::load(None, &["surface.colour=red".into()]).is_err());
        assert!(RawConfig::load(None, &["surface.kind".into()]).is_err());
        let bad = |o: &str| RunConfig::resolve(&RawConfig::load(None, &[o.into()]).unwrap()).is_err();
        assert!(bad("data.tau_spec=1,2"));
        assert!(bad("newton.damping=1.5"));
        assert!(bad("continuity.min_step=0"));
        assert!(bad("surface.kind=sphere"));
        assert!(bad("thresholds.tau_c0=-1"));
    }
}
