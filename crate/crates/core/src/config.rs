//! Run configuration, read from TOML.
//!
//! ```toml
//! [geometry]
//! width = "pi"            # number, or "pi", "2*pi", "pi/2", ...
//! boundary = "dirichlet"  # dirichlet | neumann | mixed | quasi-periodic
//! # beta = "pi/3"         # quasi-periodic only
//!
//! [physics]
//! omega2 = 2.0
//! # [physics.sweep]       # instead of omega2
//! # parameter = "omega2"  # omega2 | beta
//! # start = 0.5
//! # stop = 4.5
//! # step = 0.1
//!
//! [physics.permittivity]
//! kind = "constant"       # constant | grid | separable-fourier
//! value = 1.0
//!
//! [numerics]
//! m1 = 3
//! m2 = 6
//!
//! [trace]
//! kind = "robin"          # robin | dirichlet | neumann | custom
//!
//! [output]
//! format = "json"         # json | csv
//! ```

use crate::cell::{FourierTerm, Permittivity, PlaneTruncation};
use crate::cross_section::{BoundaryCondition, BoundaryKind};
use crate::error::{Error, Result};
use crate::halfguide::TraceOperatorSpec;
use crate::problem::{Tolerances, Waveguide};
use crate::C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

/// A real number given either literally or as a simple multiple of π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Value(f64),
    Expr(String),
}

impl Number {
    pub fn value(&self) -> std::result::Result<f64, String> {
        match self {
            Number::Value(v) => Ok(*v),
            Number::Expr(s) => parse_pi_expr(s),
        }
    }
}

/// `"pi"`, `"2pi"`, `"2*pi"`, `"pi/2"`, `"3*pi/4"`, `"-pi"` or a plain number.
fn parse_pi_expr(s: &str) -> std::result::Result<f64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let t = t.to_ascii_lowercase();
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let bad = || format!("cannot read '{s}' as a number or multiple of pi");
    let (num, den) = match t.split_once('/') {
        Some((a, b)) => (a.to_string(), b.parse::<f64>().map_err(|_| bad())?),
        None => (t.clone(), 1.0),
    };
    let coeff = match num.strip_suffix("pi").ok_or_else(bad)? {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.trim_end_matches('*').parse::<f64>().map_err(|_| bad())?,
    };
    Ok(coeff * PI / den)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub width: Number,
    pub boundary: BoundaryKind,
    #[serde(default)]
    pub beta: Option<Number>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    Omega2,
    Beta,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub start: Number,
    pub stop: Number,
    pub step: Number,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTermConfig {
    pub m1: i64,
    pub m2: u32,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PermittivityConfig {
    Constant {
        value: f64,
    },
    /// Piecewise constant samples, `values[j * n1 + i]` on cell
    /// `[i/n1, (i+1)/n1) × [jL/n2, (j+1)L/n2)`. Either `values` or `csv`
    /// (one row per `x₂` cell, `n1` columns) must be given.
    Grid {
        n1: usize,
        n2: usize,
        #[serde(default)]
        values: Option<Vec<f64>>,
        #[serde(default)]
        csv: Option<PathBuf>,
    },
    SeparableFourier {
        terms: Vec<FourierTermConfig>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    #[serde(default)]
    pub omega2: Option<f64>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    pub permittivity: PermittivityConfig,
}

fn default_n_quad() -> usize {
    256
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    pub m1: usize,
    pub m2: usize,
    /// Size of the trace matrix; defaults to `m2`.
    #[serde(default)]
    pub n_tr: Option<usize>,
    /// Strip height for characteristic values; defaults to a strip holding
    /// one right-going value per cross-section mode.
    #[serde(default)]
    pub im_max: Option<f64>,
    #[serde(default = "default_n_quad")]
    pub n_quad: usize,
    #[serde(default)]
    pub cover_depth: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceKind {
    Robin,
    Dirichlet,
    Neumann,
    Custom,
}

fn default_kappa_r() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    pub kind: TraceKind,
    #[serde(default = "default_kappa_r")]
    pub kappa_r: f64,
    /// `[re, im]`, custom traces only.
    #[serde(default)]
    pub theta_d: Option<[f64; 2]>,
    #[serde(default)]
    pub theta_n: Option<[f64; 2]>,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            kind: TraceKind::Robin,
            kappa_r: 1.0,
            theta_d: None,
            theta_n: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
    pub x1_max: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: OutputFormat,
    /// Field dumps of the family modes for the `modes` subcommand.
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub physics: PhysicsConfig,
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(skip)]
    pub hash: String,
    #[serde(skip)]
    base_dir: PathBuf,
    #[serde(skip)]
    source: String,
}

/// Line (1-based) of `key` inside `[table]` in a TOML document.
fn line_of(source: &str, table: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut table_line = None;
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix('[').and_then(|h| h.strip_suffix(']')) {
            current = h.trim().to_string();
            if current == table {
                table_line = Some(i + 1);
            }
            continue;
        }
        if current == table {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    table_line
}

fn line_at(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let source = std::fs::read_to_string(path).map_err(|e| Error::Config {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str_in(&source, &base)
    }

    /// Parses and validates a config; relative paths resolve against `base_dir`.
    pub fn from_str_in(source: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(source).map_err(|e| Error::Config {
            line: e.span().map(|s| line_at(source, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.hash = format!("{:x}", Sha256::digest(source.as_bytes()));
        cfg.base_dir = base_dir.to_path_buf();
        cfg.source = source.to_string();
        cfg.validate()?;
        Ok(cfg)
    }

    fn err(&self, table: &str, key: &str, message: impl Into<String>) -> Error {
        Error::Config {
            line: line_of(&self.source, table, key),
            message: message.into(),
        }
    }

    fn validate(&self) -> Result<()> {
        self.width()?;
        self.boundary_with_beta(None)?;
        match (&self.physics.omega2, &self.physics.sweep) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(self.err("physics", "omega2", "give exactly one of physics.omega2 and [physics.sweep]"))
            }
            (Some(w), None) if !(*w > 0.0) => {
                return Err(self.err("physics", "omega2", format!("omega2 must be positive, got {w}")))
            }
            _ => {}
        }
        if self.physics.sweep.is_some() {
            let pts = self.sweep_points()?;
            if pts.is_empty() {
                return Err(self.err("physics.sweep", "stop", "sweep range is empty"));
            }
        }
        self.permittivity()?;
        let n = &self.numerics;
        if n.m2 < 2 {
            return Err(self.err("numerics", "m2", "m2 must be at least 2"));
        }
        if let Some(ntr) = n.n_tr {
            if ntr == 0 || ntr > n.m2 {
                return Err(self.err("numerics", "n_tr", format!("n_tr must lie in 1..={}", n.m2)));
            }
        }
        if n.n_quad < 64 {
            return Err(self.err("numerics", "n_quad", "n_quad must be at least 64"));
        }
        self.trace_spec()?;
        Ok(())
    }

    pub fn width(&self) -> Result<f64> {
        let w = self
            .geometry
            .width
            .value()
            .map_err(|m| self.err("geometry", "width", m))?;
        if !(w > 0.0) {
            return Err(self.err("geometry", "width", format!("width must be positive, got {w}")));
        }
        Ok(w)
    }

    /// Boundary condition, with `beta` overridden during a β sweep.
    pub fn boundary_with_beta(&self, beta: Option<f64>) -> Result<BoundaryCondition> {
        let kind = self.geometry.boundary;
        let given = match &self.geometry.beta {
            Some(b) => Some(b.value().map_err(|m| self.err("geometry", "beta", m))?),
            None => None,
        };
        let beta = match (kind, beta.or(given)) {
            (BoundaryKind::QuasiPeriodic, None) => {
                if self.sweeps(SweepParameter::Beta) {
                    Some(0.0)
                } else {
                    return Err(self.err("geometry", "boundary", "quasi-periodic sides need geometry.beta"));
                }
            }
            (BoundaryKind::QuasiPeriodic, b) => b,
            (_, Some(_)) => {
                return Err(self.err("geometry", "beta", "beta is only meaningful for quasi-periodic sides"))
            }
            (_, None) => None,
        };
        BoundaryCondition::new(kind, beta).map_err(|e| self.err("geometry", "beta", e.to_string()))
    }

    fn sweeps(&self, p: SweepParameter) -> bool {
        self.physics.sweep.as_ref().is_some_and(|s| s.parameter == p)
    }

    pub fn sweep_parameter(&self) -> Option<SweepParameter> {
        self.physics.sweep.as_ref().map(|s| s.parameter)
    }

    /// Sweep values `start + k·step ≤ stop`, computed by multiplication so
    /// that grid points are reproducible.
    pub fn sweep_points(&self) -> Result<Vec<f64>> {
        let Some(s) = &self.physics.sweep else {
            return Ok(Vec::new());
        };
        let get = |n: &Number, key: &str| n.value().map_err(|m| self.err("physics.sweep", key, m));
        let (a, b, h) = (get(&s.start, "start")?, get(&s.stop, "stop")?, get(&s.step, "step")?);
        if !(h > 0.0) {
            return Err(self.err("physics.sweep", "step", "sweep step must be positive"));
        }
        let count = ((b - a) / h + 1e-9).floor();
        if count < 0.0 {
            return Ok(Vec::new());
        }
        Ok((0..=count as usize).map(|k| a + k as f64 * h).collect())
    }

    pub fn permittivity(&self) -> Result<Permittivity> {
        let table = "physics.permittivity";
        match &self.physics.permittivity {
            PermittivityConfig::Constant { value } => {
                if !(*value > 0.0) {
                    return Err(self.err(table, "value", format!("permittivity must be positive, got {value}")));
                }
                Ok(Permittivity::Constant(*value))
            }
            PermittivityConfig::Grid { n1, n2, values, csv } => {
                let values = match (values, csv) {
                    (Some(v), None) => v.clone(),
                    (None, Some(p)) => self.read_grid_csv(p)?,
                    _ => return Err(self.err(table, "kind", "grid permittivity needs exactly one of values and csv")),
                };
                Permittivity::grid(*n1, *n2, values).map_err(|e| self.err(table, "values", e.to_string()))
            }
            PermittivityConfig::SeparableFourier { terms } => {
                if terms.is_empty() {
                    return Err(self.err(table, "terms", "separable-fourier permittivity needs at least one term"));
                }
                let eps = Permittivity::SeparableFourier(
                    terms
                        .iter()
                        .map(|t| FourierTerm {
                            m1: t.m1,
                            m2: t.m2,
                            coeff: C64::new(t.re, t.im),
                        })
                        .collect(),
                );
                let (lo, _) = eps.bounds(self.width()?);
                if !(lo > 0.0) {
                    return Err(self.err(table, "terms", format!("permittivity not bounded away from zero (lower bound {lo:.3e})")));
                }
                Ok(eps)
            }
        }
    }

    fn read_grid_csv(&self, path: &Path) -> Result<Vec<f64>> {
        let full = self.base_dir.join(path);
        let text = std::fs::read_to_string(&full).map_err(|e| Error::Config {
            line: line_of(&self.source, "physics.permittivity", "csv"),
            message: format!("cannot read {}: {e}", full.display()),
        })?;
        let mut out = Vec::new();
        for (i, row) in text.lines().enumerate().filter(|(_, r)| !r.trim().is_empty()) {
            for cell in row.split(',') {
                out.push(cell.trim().parse::<f64>().map_err(|_| Error::Config {
                    line: Some(i + 1),
                    message: format!("{}: '{}' is not a number", full.display(), cell.trim()),
                })?);
            }
        }
        Ok(out)
    }

    pub fn truncation(&self) -> Result<PlaneTruncation> {
        PlaneTruncation::new(self.numerics.m1, self.numerics.m2)
            .map_err(|e| self.err("numerics", "m2", e.to_string()))
    }

    pub fn n_tr(&self) -> usize {
        self.numerics.n_tr.unwrap_or(self.numerics.m2)
    }

    pub fn trace_spec(&self) -> Result<TraceOperatorSpec> {
        let t = &self.trace;
        let spec = match t.kind {
            TraceKind::Robin => TraceOperatorSpec::robin(t.kappa_r),
            TraceKind::Dirichlet => Ok(TraceOperatorSpec::dirichlet()),
            TraceKind::Neumann => Ok(TraceOperatorSpec::neumann()),
            TraceKind::Custom => {
                let c = |v: Option<[f64; 2]>| v.map_or(C64::new(0.0, 0.0), |[re, im]| C64::new(re, im));
                TraceOperatorSpec::new(c(t.theta_d), c(t.theta_n))
            }
        };
        spec.map_err(|e| self.err("trace", "kind", e.to_string()))
    }

    /// The waveguide at a single frequency (and `β` for β sweeps).
    pub fn waveguide(&self, omega2: f64, beta: Option<f64>) -> Result<Waveguide> {
        let bc = self.boundary_with_beta(beta)?;
        Waveguide::new(
            bc,
            self.width()?,
            self.permittivity()?,
            self.truncation()?,
            omega2,
            self.numerics.tolerances,
        )
        .map_err(|e| match e {
            Error::InvalidParameter(m) => self.err("physics.permittivity", "kind", m),
            other => other,
        })
    }

    /// Waveguide for a non-sweep run.
    pub fn single(&self) -> Result<Waveguide> {
        let omega2 = match (self.physics.omega2, self.sweep_parameter()) {
            (Some(w), _) => w,
            _ => return Err(self.err("physics", "omega2", "this subcommand needs physics.omega2")),
        };
        self.waveguide(omega2, None)
    }
}
