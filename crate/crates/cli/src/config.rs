//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//!
//! [domain]
//! type = "disk"
//! radius = 1.0
//!
//! [field]
//! expr = "2 - x"
//!
//! [sweep]
//! b = [100, 200, 400, 800, 1600]
//! # or: geometric = { start = 100, stop = 1600, count = 5 }
//!
//! [solver]
//! nev = 1
//! tol = 1e-10
//!
//! [output]
//! dir = "out"
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use magneto_spectra::field::FieldSpec;
use magneto_spectra::geometry::CurveKind;
use magneto_spectra::strip::StripSettings;
use magneto_spectra::sweep_fit::{SolverSettings, DEFAULT_EXPONENTS};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_domain")]
    pub domain: CurveKind,
    pub field: FieldSpec,
    #[serde(default)]
    pub strip: StripSettings,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub agmon: AgmonConfig,
    #[serde(default)]
    pub hc3: Hc3Config,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_domain() -> CurveKind {
    CurveKind::Disk { radius: 1.0 }
}

fn default_seed() -> u64 {
    SolverSettings::default().seed
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometric: Option<Geometric>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometric {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl SweepSpec {
    pub fn values(&self) -> anyhow::Result<Vec<f64>> {
        match (&self.b, &self.geometric) {
            (Some(b), None) => Ok(b.clone()),
            (None, Some(g)) => {
                if g.count < 2 || !(g.start > 0.0) || !(g.stop > g.start) {
                    bail!("geometric sweep needs 0 < start < stop and count >= 2");
                }
                let r = (g.stop / g.start).powf(1.0 / (g.count - 1) as f64);
                Ok((0..g.count).map(|i| if i + 1 == g.count { g.stop } else { g.start * r.powi(i as i32) }).collect())
            }
            (Some(_), Some(_)) => bail!("sweep: give either `b` or `geometric`, not both"),
            (None, None) => bail!("sweep: missing `b` list or `geometric` range"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub nev: usize,
    pub tol: f64,
    pub floquet_check: bool,
    /// Worker threads; 0 means one per logical core.
    pub jobs: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverSettings::default();
        Self { nev: s.nev, tol: s.tol, floquet_check: s.floquet_check, jobs: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub exponents: Vec<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { exponents: DEFAULT_EXPONENTS.to_vec() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgmonConfig {
    pub n_max: u32,
    pub table_points: usize,
}

impl Default for AgmonConfig {
    fn default() -> Self {
        Self { n_max: 2, table_points: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hc3Config {
    pub kappa: Vec<f64>,
}

impl Default for Hc3Config {
    fn default() -> Self {
        Self { kappa: vec![5.0, 10.0, 20.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.solver.nev == 0 {
            bail!("solver.nev must be at least 1");
        }
        if !(self.solver.tol > 0.0 && self.solver.tol < 1e-2) {
            bail!("solver.tol must lie in (0, 1e-2)");
        }
        if self.fit.exponents.is_empty() {
            bail!("fit.exponents must not be empty");
        }
        if self.hc3.kappa.iter().any(|k| !(*k > 0.0)) {
            bail!("hc3.kappa values must be positive");
        }
        Ok(())
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            nev: self.solver.nev,
            tol: self.solver.tol,
            seed: self.seed,
            floquet_check: self.solver.floquet_check,
        }
    }
}
