//! Simulation configuration files: parsing, validation and canonical
//! serialization.
//!
//! Line-based `key = value` pairs under `[section]` headers; `#` starts a
//! comment. `[region]`, `[source]` and `[receiver]` may repeat, and so may
//! `material` under `[materials]`. Unset optional keys keep `None` so that
//! serialization reproduces exactly what was parsed; effective values come
//! from the accessor methods, which also report the defaults applied.

mod build;

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use build::Simulation;

use crate::assembly::AssemblyError;
use crate::excitation::{Channel, ExcitationError, DEFAULT_TUKEY_ALPHA};
use crate::material::{MaterialError, TissueProperties};
use crate::mesh::{BoundaryKind, MeshError};
use crate::solver::{SolverError, DEFAULT_BLOWUP_INTERVAL, DEFAULT_COURANT};

pub const DEFAULT_DEGREE: usize = 2;
pub const DEFAULT_T_END: f64 = 0.7e-3;
pub const DEFAULT_F0: f64 = 40e3;
pub const DEFAULT_CYCLES: f64 = 4.0;
pub const DEFAULT_R_FLAT_FRACTION: f64 = 0.3;
pub const DEFAULT_SIGMA_FRACTION: f64 = 0.3;
pub const DEFAULT_OUT_DIR: &str = "out";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { name: String, line: usize },
    #[error("line {line}: unknown key '{key}' in [{section}]")]
    UnknownKey { key: String, section: String, line: usize },
    #[error("line {line}: key '{key}' given twice")]
    DuplicateKey { key: String, line: usize },
    #[error("line {line}: invalid value for '{key}': {message}")]
    Value { key: String, line: usize, message: String },
    #[error("missing {0}")]
    Missing(String),
    #[error("{what}: {message}")]
    Range { what: String, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Excitation(#[from] ExcitationError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeshConfig {
    pub shex: Option<String>,
    pub svox: Option<String>,
    pub dims: Option<[usize; 3]>,
    pub spacing: Option<[f64; 3]>,
    pub origin: Option<[f64; 3]>,
    /// Fill material of a generated grid.
    pub material: Option<u32>,
    pub hu_snap: Option<bool>,
}

/// Box of voxels (by centre) assigned one material.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionConfig {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub material: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryConfig {
    pub default: Option<BoundaryKind>,
    /// xmin, xmax, ymin, ymax, zmin, zmax.
    pub sides: [Option<BoundaryKind>; 6],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaterialsConfig {
    /// `dolphin` or `none`.
    pub builtin: Option<String>,
    pub smat: Option<String>,
    pub inline: Vec<(u32, TissueProperties)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverConfig {
    pub degree: Option<usize>,
    pub courant: Option<f64>,
    pub t_end: Option<f64>,
    /// Overrides the CFL step.
    pub dt: Option<f64>,
    pub blowup_interval: Option<usize>,
    pub energy: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputConfig {
    pub dir: Option<String>,
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceType {
    Pressure,
    Force,
    PlaneWave,
}

impl SourceType {
    fn name(self) -> &'static str {
        match self {
            SourceType::Pressure => "pressure",
            SourceType::Force => "force",
            SourceType::PlaneWave => "plane_wave",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub name: Option<String>,
    pub kind: SourceType,
    pub position: Option<[f64; 3]>,
    pub direction: Option<[f64; 3]>,
    pub f0: Option<f64>,
    pub cycles: Option<f64>,
    pub tukey_alpha: Option<f64>,
    pub amplitude: Option<f64>,
    pub delay: Option<f64>,
    pub axis: Option<usize>,
    pub plane: Option<f64>,
    pub sign: Option<f64>,
    pub center: Option<[f64; 2]>,
    pub half_width: Option<f64>,
    pub spacing: Option<f64>,
    pub r_flat: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverConfig {
    pub name: String,
    pub position: [f64; 3],
    /// Defaults to pressure in fluid and vx vy vz in solid.
    pub channels: Option<Vec<Channel>>,
}

/// Parameters of the validation subcommands.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationConfig {
    pub r1: Option<[f64; 3]>,
    pub r2: Option<[f64; 3]>,
    pub orientation: Option<[f64; 3]>,
    pub distance: Option<f64>,
    pub degrees: Option<Vec<usize>>,
    pub mode: Option<[usize; 3]>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulationConfig {
    pub mesh: MeshConfig,
    pub regions: Vec<RegionConfig>,
    pub boundary: BoundaryConfig,
    pub materials: MaterialsConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub sources: Vec<SourceConfig>,
    pub receivers: Vec<ReceiverConfig>,
    pub validation: ValidationConfig,
}

pub const SIDE_NAMES: [&str; 6] = ["xmin", "xmax", "ymin", "ymax", "zmin", "zmax"];

fn boundary_name(k: BoundaryKind) -> &'static str {
    match k {
        BoundaryKind::Absorbing => "absorbing",
        BoundaryKind::Free => "free",
        BoundaryKind::Symmetry => "symmetry",
    }
}

fn axis_name(a: usize) -> &'static str {
    ["x", "y", "z"][a]
}

enum Block {
    None,
    Mesh,
    Region(Option<[f64; 3]>, Option<[f64; 3]>, Option<u32>, usize),
    Boundary,
    Materials,
    Solver,
    Output,
    Source(Box<PartialSource>),
    Receiver(Option<String>, Option<[f64; 3]>, Option<Vec<Channel>>, usize),
    Validation,
}

struct PartialSource {
    kind: Option<SourceType>,
    cfg: SourceConfig,
    line: usize,
}

struct Value<'a> {
    key: &'a str,
    text: &'a str,
    line: usize,
}

impl<'a> Value<'a> {
    fn err(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::Value { key: self.key.to_string(), line: self.line, message: message.into() }
    }

    fn f64(&self) -> Result<f64, ConfigError> {
        let v: f64 = self.text.parse().map_err(|_| self.err(format!("'{}' is not a number", self.text)))?;
        if !v.is_finite() {
            return Err(self.err("must be finite"));
        }
        Ok(v)
    }

    fn positive(&self) -> Result<f64, ConfigError> {
        let v = self.f64()?;
        if v <= 0.0 {
            return Err(self.err(format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    fn usize(&self) -> Result<usize, ConfigError> {
        self.text.parse().map_err(|_| self.err(format!("'{}' is not a non-negative integer", self.text)))
    }

    fn u32(&self) -> Result<u32, ConfigError> {
        self.text.parse().map_err(|_| self.err(format!("'{}' is not a material id", self.text)))
    }

    fn bool(&self) -> Result<bool, ConfigError> {
        match self.text {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(self.err(format!("expected true or false, got '{other}'"))),
        }
    }

    fn floats(&self) -> Result<Vec<f64>, ConfigError> {
        self.text
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.err(format!("'{t}' is not a finite number")))
            })
            .collect()
    }

    fn vec3(&self) -> Result<[f64; 3], ConfigError> {
        let v = self.floats()?;
        v.try_into().map_err(|_| self.err("expected three numbers"))
    }

    fn string(&self) -> Result<String, ConfigError> {
        if self.text.is_empty() {
            return Err(self.err("must not be empty"));
        }
        Ok(self.text.to_string())
    }

    fn name(&self) -> Result<String, ConfigError> {
        if self.text.is_empty() || !self.text.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(self.err("names use letters, digits, '_' and '-' only"));
        }
        Ok(self.text.to_string())
    }

    fn boundary(&self) -> Result<BoundaryKind, ConfigError> {
        match self.text {
            "absorbing" => Ok(BoundaryKind::Absorbing),
            "free" => Ok(BoundaryKind::Free),
            "symmetry" => Ok(BoundaryKind::Symmetry),
            other => Err(self.err(format!("expected absorbing, free or symmetry, got '{other}'"))),
        }
    }

    fn axis(&self) -> Result<usize, ConfigError> {
        match self.text {
            "x" => Ok(0),
            "y" => Ok(1),
            "z" => Ok(2),
            other => Err(self.err(format!("expected x, y or z, got '{other}'"))),
        }
    }
}

/// Stores `v` in `slot`, rejecting a second assignment.
fn put<T>(slot: &mut Option<T>, v: T, val: &Value) -> Result<(), ConfigError> {
    if slot.is_some() {
        return Err(ConfigError::DuplicateKey { key: val.key.to_string(), line: val.line });
    }
    *slot = Some(v);
    Ok(())
}

impl SimulationConfig {
    pub fn parse_str(text: &str) -> Result<SimulationConfig, ConfigError> {
        SimulationConfig::parse(text.as_bytes())
    }

    pub fn parse<R: BufRead>(input: R) -> Result<SimulationConfig, ConfigError> {
        let mut cfg = SimulationConfig::default();
        let mut block = Block::None;
        let mut seen_sections: Vec<&'static str> = Vec::new();
        let mut last_line = 0;
        for (idx, line) in input.lines().enumerate() {
            let line = line.map_err(|source| ConfigError::Io { path: PathBuf::from("<config>"), source })?;
            let ln = idx + 1;
            last_line = ln;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax { line: ln, message: format!("malformed section header '{body}'") })?
                    .trim();
                cfg.close(std::mem::replace(&mut block, Block::None))?;
                block = match name {
                    "region" => Block::Region(None, None, None, ln),
                    "source" => Block::Source(Box::new(PartialSource {
                        kind: None,
                        cfg: SourceConfig::empty(SourceType::Pressure),
                        line: ln,
                    })),
                    "receiver" => Block::Receiver(None, None, None, ln),
                    single => {
                        let (tag, b) = match single {
                            "mesh" => ("mesh", Block::Mesh),
                            "boundary" => ("boundary", Block::Boundary),
                            "materials" => ("materials", Block::Materials),
                            "solver" => ("solver", Block::Solver),
                            "output" => ("output", Block::Output),
                            "validation" => ("validation", Block::Validation),
                            other => return Err(ConfigError::UnknownSection { name: other.to_string(), line: ln }),
                        };
                        if seen_sections.contains(&tag) {
                            return Err(ConfigError::Syntax { line: ln, message: format!("section [{tag}] given twice") });
                        }
                        seen_sections.push(tag);
                        b
                    }
                };
                continue;
            }
            let (key, text) = body
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: ln, message: format!("expected 'key = value', got '{body}'") })?;
            let v = Value { key: key.trim(), text: text.trim(), line: ln };
            cfg.assign(&mut block, &v)?;
        }
        cfg.close(block)?;
        let _ = last_line;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<SimulationConfig, ConfigError> {
        let f = std::fs::File::open(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        SimulationConfig::parse(std::io::BufReader::new(f))
    }

    fn assign(&mut self, block: &mut Block, v: &Value) -> Result<(), ConfigError> {
        let unknown = |section: &str| ConfigError::UnknownKey {
            key: v.key.to_string(),
            section: section.to_string(),
            line: v.line,
        };
        match block {
            Block::None => {
                return Err(ConfigError::Syntax { line: v.line, message: format!("key '{}' outside any section", v.key) })
            }
            Block::Mesh => {
                let m = &mut self.mesh;
                match v.key {
                    "shex" => put(&mut m.shex, v.string()?, v)?,
                    "svox" => put(&mut m.svox, v.string()?, v)?,
                    "dims" => {
                        let d: Vec<usize> =
                            v.text.split_whitespace().map(|t| t.parse().map_err(|_| v.err("expected three integers"))).collect::<Result<_, _>>()?;
                        let d: [usize; 3] = d.try_into().map_err(|_| v.err("expected three integers"))?;
                        if d.contains(&0) {
                            return Err(v.err("dimensions must be positive"));
                        }
                        put(&mut m.dims, d, v)?
                    }
                    "spacing" => {
                        let s = v.floats()?;
                        let s: [f64; 3] = match s.len() {
                            1 => [s[0]; 3],
                            3 => [s[0], s[1], s[2]],
                            _ => return Err(v.err("expected one or three numbers")),
                        };
                        if s.iter().any(|x| *x <= 0.0) {
                            return Err(v.err("spacing must be positive"));
                        }
                        put(&mut m.spacing, s, v)?
                    }
                    "origin" => put(&mut m.origin, v.vec3()?, v)?,
                    "material" => put(&mut m.material, v.u32()?, v)?,
                    "hu_snap" => put(&mut m.hu_snap, v.bool()?, v)?,
                    _ => return Err(unknown("mesh")),
                }
            }
            Block::Region(min, max, mat, _) => match v.key {
                "min" => put(min, v.vec3()?, v)?,
                "max" => put(max, v.vec3()?, v)?,
                "material" => put(mat, v.u32()?, v)?,
                _ => return Err(unknown("region")),
            },
            Block::Boundary => {
                let kind = v.boundary();
                if v.key == "default" {
                    put(&mut self.boundary.default, kind?, v)?;
                } else if let Some(s) = SIDE_NAMES.iter().position(|n| *n == v.key) {
                    put(&mut self.boundary.sides[s], kind?, v)?;
                } else {
                    return Err(unknown("boundary"));
                }
            }
            Block::Materials => match v.key {
                "builtin" => {
                    if v.text != "dolphin" && v.text != "none" {
                        return Err(v.err(format!("expected dolphin or none, got '{}'", v.text)));
                    }
                    put(&mut self.materials.builtin, v.text.to_string(), v)?
                }
                "smat" => put(&mut self.materials.smat, v.string()?, v)?,
                "material" => {
                    let t: Vec<&str> = v.text.split_whitespace().collect();
                    if t.len() != 5 && t.len() != 7 {
                        return Err(v.err("expected '<id> <name> <rho> <vp> <vs> [hu_min hu_max]'"));
                    }
                    let num = |s: &str| s.parse::<f64>().map_err(|_| v.err(format!("'{s}' is not a number")));
                    let id: u32 = t[0].parse().map_err(|_| v.err(format!("'{}' is not a material id", t[0])))?;
                    let hu = if t.len() == 7 { Some((num(t[5])?, num(t[6])?)) } else { None };
                    let props = TissueProperties::new(t[1], num(t[2])?, num(t[3])?, num(t[4])?, hu).map_err(|e| {
                        ConfigError::Range { what: format!("line {} material {}", v.line, t[1]), message: e.to_string() }
                    })?;
                    if self.materials.inline.iter().any(|(i, _)| *i == id) {
                        return Err(v.err(format!("material id {id} defined twice")));
                    }
                    self.materials.inline.push((id, props));
                }
                _ => return Err(unknown("materials")),
            },
            Block::Solver => {
                let s = &mut self.solver;
                match v.key {
                    "degree" => {
                        let d = v.usize()?;
                        if !(1..=10).contains(&d) {
                            return Err(v.err(format!("degree must lie in 1..=10, got {d}")));
                        }
                        put(&mut s.degree, d, v)?
                    }
                    "courant" => put(&mut s.courant, v.positive()?, v)?,
                    "t_end" => put(&mut s.t_end, v.positive()?, v)?,
                    "dt" => put(&mut s.dt, v.positive()?, v)?,
                    "blowup_interval" => {
                        let b = v.usize()?;
                        if b == 0 {
                            return Err(v.err("must be at least 1"));
                        }
                        put(&mut s.blowup_interval, b, v)?
                    }
                    "energy" => put(&mut s.energy, v.bool()?, v)?,
                    _ => return Err(unknown("solver")),
                }
            }
            Block::Output => match v.key {
                "dir" => put(&mut self.output.dir, v.string()?, v)?,
                "snapshot_every" => put(&mut self.output.snapshot_every, v.usize()?, v)?,
                _ => return Err(unknown("output")),
            },
            Block::Source(ps) => {
                let c = &mut ps.cfg;
                match v.key {
                    "name" => put(&mut c.name, v.name()?, v)?,
                    "type" => {
                        let k = match v.text {
                            "pressure" => SourceType::Pressure,
                            "force" => SourceType::Force,
                            "plane_wave" => SourceType::PlaneWave,
                            other => return Err(v.err(format!("expected pressure, force or plane_wave, got '{other}'"))),
                        };
                        put(&mut ps.kind, k, v)?
                    }
                    "position" => put(&mut c.position, v.vec3()?, v)?,
                    "direction" => {
                        let d = v.vec3()?;
                        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                        if (n - 1.0).abs() > 1e-9 {
                            return Err(v.err(format!("direction must be a unit vector (norm {n})")));
                        }
                        put(&mut c.direction, d, v)?
                    }
                    "f0" => put(&mut c.f0, v.positive()?, v)?,
                    "cycles" => {
                        let n = v.f64()?;
                        if n < 1.0 {
                            return Err(v.err(format!("at least one cycle required, got {n}")));
                        }
                        put(&mut c.cycles, n, v)?
                    }
                    "tukey_alpha" => {
                        let a = v.f64()?;
                        if !(0.0..=1.0).contains(&a) {
                            return Err(v.err(format!("must lie in [0, 1], got {a}")));
                        }
                        put(&mut c.tukey_alpha, a, v)?
                    }
                    "amplitude" => put(&mut c.amplitude, v.f64()?, v)?,
                    "delay" => {
                        let d = v.f64()?;
                        if d < 0.0 {
                            return Err(v.err("must not be negative"));
                        }
                        put(&mut c.delay, d, v)?
                    }
                    "axis" => put(&mut c.axis, v.axis()?, v)?,
                    "plane" => put(&mut c.plane, v.f64()?, v)?,
                    "sign" => {
                        let s = v.f64()?;
                        if s != 1.0 && s != -1.0 {
                            return Err(v.err("must be 1 or -1"));
                        }
                        put(&mut c.sign, s, v)?
                    }
                    "center" => {
                        let p = v.floats()?;
                        let p: [f64; 2] = p.try_into().map_err(|_| v.err("expected two numbers"))?;
                        put(&mut c.center, p, v)?
                    }
                    "half_width" => put(&mut c.half_width, v.positive()?, v)?,
                    "spacing" => put(&mut c.spacing, v.positive()?, v)?,
                    "r_flat" => {
                        let r = v.f64()?;
                        if r < 0.0 {
                            return Err(v.err("must not be negative"));
                        }
                        put(&mut c.r_flat, r, v)?
                    }
                    "sigma" => put(&mut c.sigma, v.positive()?, v)?,
                    _ => return Err(unknown("source")),
                }
            }
            Block::Receiver(name, pos, ch, _) => match v.key {
                "name" => put(name, v.name()?, v)?,
                "position" => put(pos, v.vec3()?, v)?,
                "channels" => {
                    let list: Vec<Channel> = v
                        .text
                        .split_whitespace()
                        .map(|t| Channel::parse(t).ok_or_else(|| v.err(format!("unknown channel '{t}'"))))
                        .collect::<Result<_, _>>()?;
                    if list.is_empty() {
                        return Err(v.err("at least one channel required"));
                    }
                    let mut dedup = list.clone();
                    dedup.sort();
                    dedup.dedup();
                    if dedup.len() != list.len() {
                        return Err(v.err("channel listed twice"));
                    }
                    put(ch, list, v)?
                }
                _ => return Err(unknown("receiver")),
            },
            Block::Validation => {
                let c = &mut self.validation;
                match v.key {
                    "r1" => put(&mut c.r1, v.vec3()?, v)?,
                    "r2" => put(&mut c.r2, v.vec3()?, v)?,
                    "orientation" => put(&mut c.orientation, v.vec3()?, v)?,
                    "distance" => put(&mut c.distance, v.positive()?, v)?,
                    "degrees" => {
                        let d: Vec<usize> = v
                            .text
                            .split_whitespace()
                            .map(|t| t.parse().ok().filter(|d| (1..=10).contains(d)).ok_or_else(|| v.err(format!("'{t}' is not a degree in 1..=10"))))
                            .collect::<Result<_, _>>()?;
                        if d.len() < 2 {
                            return Err(v.err("at least two degrees required"));
                        }
                        put(&mut c.degrees, d, v)?
                    }
                    "mode" => {
                        let m: Vec<usize> =
                            v.text.split_whitespace().map(|t| t.parse().map_err(|_| v.err("expected three integers"))).collect::<Result<_, _>>()?;
                        let m: [usize; 3] = m.try_into().map_err(|_| v.err("expected three integers"))?;
                        if m == [0, 0, 0] {
                            return Err(v.err("mode (0, 0, 0) is static"));
                        }
                        put(&mut c.mode, m, v)?
                    }
                    _ => return Err(unknown("validation")),
                }
            }
        }
        Ok(())
    }

    fn close(&mut self, block: Block) -> Result<(), ConfigError> {
        match block {
            Block::Region(min, max, mat, line) => {
                let missing = |k: &str| ConfigError::Missing(format!("'{k}' in [region] starting at line {line}"));
                let (min, max) = (min.ok_or_else(|| missing("min"))?, max.ok_or_else(|| missing("max"))?);
                if (0..3).any(|a| min[a] > max[a]) {
                    return Err(ConfigError::Range {
                        what: format!("[region] at line {line}"),
                        message: "min must not exceed max".into(),
                    });
                }
                self.regions.push(RegionConfig { min, max, material: mat.ok_or_else(|| missing("material"))? });
            }
            Block::Source(ps) => {
                let PartialSource { kind, mut cfg, line } = *ps;
                cfg.kind = kind.ok_or_else(|| ConfigError::Missing(format!("'type' in [source] starting at line {line}")))?;
                let missing = |k: &str| ConfigError::Missing(format!("'{k}' in [source] starting at line {line}"));
                match cfg.kind {
                    SourceType::Pressure => {
                        cfg.position.ok_or_else(|| missing("position"))?;
                    }
                    SourceType::Force => {
                        cfg.position.ok_or_else(|| missing("position"))?;
                        cfg.direction.ok_or_else(|| missing("direction"))?;
                    }
                    SourceType::PlaneWave => {
                        for (k, ok) in [
                            ("axis", cfg.axis.is_some()),
                            ("plane", cfg.plane.is_some()),
                            ("center", cfg.center.is_some()),
                            ("half_width", cfg.half_width.is_some()),
                            ("spacing", cfg.spacing.is_some()),
                        ] {
                            if !ok {
                                return Err(missing(k));
                            }
                        }
                    }
                }
                self.sources.push(cfg);
            }
            Block::Receiver(name, pos, channels, line) => {
                let missing = |k: &str| ConfigError::Missing(format!("'{k}' in [receiver] starting at line {line}"));
                self.receivers.push(ReceiverConfig {
                    name: name.ok_or_else(|| missing("name"))?,
                    position: pos.ok_or_else(|| missing("position"))?,
                    channels,
                });
            }
            _ => {}
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.mesh;
        let n_sources = [m.shex.is_some(), m.svox.is_some(), m.dims.is_some()].iter().filter(|b| **b).count();
        if n_sources > 1 {
            return Err(ConfigError::Range {
                what: "[mesh]".into(),
                message: "give exactly one of shex, svox or dims".into(),
            });
        }
        if m.dims.is_some() && m.spacing.is_none() {
            return Err(ConfigError::Missing("'spacing' in [mesh] for a generated grid".into()));
        }
        if m.dims.is_none() && (m.spacing.is_some() || m.material.is_some()) {
            return Err(ConfigError::Range {
                what: "[mesh]".into(),
                message: "spacing and material apply to generated grids only".into(),
            });
        }
        if m.shex.is_some() {
            if !self.regions.is_empty() || m.origin.is_some() || m.hu_snap.is_some() {
                return Err(ConfigError::Range {
                    what: "[mesh]".into(),
                    message: "origin, hu_snap and [region] do not apply to SHEX1 meshes".into(),
                });
            }
            if self.boundary != BoundaryConfig::default() {
                return Err(ConfigError::Range {
                    what: "[boundary]".into(),
                    message: "SHEX1 meshes carry their own boundary face sets".into(),
                });
            }
        }
        let mut names: Vec<String> = self.receivers.iter().map(|r| r.name.clone()).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(ConfigError::Range { what: "[receiver]".into(), message: "receiver names must be unique".into() });
        }
        let mut snames: Vec<String> = (0..self.sources.len()).map(|i| self.source_name(i)).collect();
        snames.sort();
        if snames.windows(2).any(|w| w[0] == w[1]) {
            return Err(ConfigError::Range { what: "[source]".into(), message: "source names must be unique".into() });
        }
        Ok(())
    }

    /// Effective source name (`source<k>` when unnamed, k from 1).
    pub fn source_name(&self, i: usize) -> String {
        self.sources[i].name.clone().unwrap_or_else(|| format!("source{}", i + 1))
    }

    pub fn degree(&self) -> usize {
        self.solver.degree.unwrap_or(DEFAULT_DEGREE)
    }

    pub fn courant(&self) -> f64 {
        self.solver.courant.unwrap_or(DEFAULT_COURANT)
    }

    pub fn t_end(&self) -> f64 {
        self.solver.t_end.unwrap_or(DEFAULT_T_END)
    }

    pub fn blowup_interval(&self) -> usize {
        self.solver.blowup_interval.unwrap_or(DEFAULT_BLOWUP_INTERVAL)
    }

    pub fn out_dir(&self) -> &str {
        self.output.dir.as_deref().unwrap_or(DEFAULT_OUT_DIR)
    }

    pub fn boundary_kind(&self, side: usize) -> BoundaryKind {
        self.boundary.sides[side].or(self.boundary.default).unwrap_or_default()
    }

    /// Every default filled in for an unset key, as `default.<key>` entries.
    pub fn applied_defaults(&self) -> Vec<(String, String)> {
        let mut d = Vec::new();
        let mut add = |k: String, v: String| d.push((format!("default.{k}"), v));
        if self.solver.degree.is_none() {
            add("solver.degree".into(), DEFAULT_DEGREE.to_string());
        }
        if self.solver.courant.is_none() {
            add("solver.courant".into(), DEFAULT_COURANT.to_string());
        }
        if self.solver.t_end.is_none() {
            add("solver.t_end".into(), DEFAULT_T_END.to_string());
        }
        if self.solver.blowup_interval.is_none() {
            add("solver.blowup_interval".into(), DEFAULT_BLOWUP_INTERVAL.to_string());
        }
        if self.materials.builtin.is_none() && self.materials.smat.is_none() {
            add("materials.builtin".into(), "dolphin".into());
        }
        if self.output.dir.is_none() {
            add("output.dir".into(), DEFAULT_OUT_DIR.into());
        }
        if self.mesh.dims.is_some() || self.mesh.svox.is_some() {
            for (s, name) in SIDE_NAMES.iter().enumerate() {
                if self.boundary.sides[s].is_none() && self.boundary.default.is_none() {
                    add(format!("boundary.{name}"), "absorbing".into());
                }
            }
            if self.mesh.origin.is_none() {
                add("mesh.origin".into(), "0 0 0".into());
            }
        }
        for (i, s) in self.sources.iter().enumerate() {
            let n = self.source_name(i);
            if s.f0.is_none() {
                add(format!("source.{n}.f0"), DEFAULT_F0.to_string());
            }
            if s.cycles.is_none() {
                add(format!("source.{n}.cycles"), DEFAULT_CYCLES.to_string());
            }
            if s.tukey_alpha.is_none() {
                add(format!("source.{n}.tukey_alpha"), DEFAULT_TUKEY_ALPHA.to_string());
            }
            if s.amplitude.is_none() {
                add(format!("source.{n}.amplitude"), "1".into());
            }
            if s.delay.is_none() {
                add(format!("source.{n}.delay"), "0".into());
            }
            if s.kind == SourceType::PlaneWave {
                if s.sign.is_none() {
                    add(format!("source.{n}.sign"), "-1".into());
                }
                if s.r_flat.is_none() {
                    add(format!("source.{n}.r_flat"), format!("{DEFAULT_R_FLAT_FRACTION} * half_width"));
                }
                if s.sigma.is_none() {
                    add(format!("source.{n}.sigma"), format!("{DEFAULT_SIGMA_FRACTION} * half_width"));
                }
            }
        }
        d
    }

    /// Canonical text form; parsing it yields an identical config.
    pub fn serialize(&self) -> String {
        let mut o = String::new();
        let v3 = |v: &[f64; 3]| format!("{} {} {}", v[0], v[1], v[2]);
        macro_rules! line {
            ($k:expr, $v:expr) => {
                writeln!(o, "{} = {}", $k, $v).expect("string write")
            };
        }
        macro_rules! opt {
            ($k:expr, $slot:expr, $f:expr) => {
                if let Some(x) = &$slot {
                    line!($k, $f(x));
                }
            };
        }
        let m = &self.mesh;
        o.push_str("[mesh]\n");
        opt!("shex", m.shex, |s: &String| s.clone());
        opt!("svox", m.svox, |s: &String| s.clone());
        opt!("dims", m.dims, |d: &[usize; 3]| format!("{} {} {}", d[0], d[1], d[2]));
        opt!("spacing", m.spacing, v3);
        opt!("origin", m.origin, v3);
        opt!("material", m.material, |x: &u32| x.to_string());
        opt!("hu_snap", m.hu_snap, |x: &bool| x.to_string());
        for r in &self.regions {
            o.push_str("\n[region]\n");
            line!("min", v3(&r.min));
            line!("max", v3(&r.max));
            line!("material", r.material);
        }
        o.push_str("\n[boundary]\n");
        opt!("default", self.boundary.default, |k: &BoundaryKind| boundary_name(*k));
        for (s, name) in SIDE_NAMES.iter().enumerate() {
            opt!(name, self.boundary.sides[s], |k: &BoundaryKind| boundary_name(*k));
        }
        o.push_str("\n[materials]\n");
        opt!("builtin", self.materials.builtin, |s: &String| s.clone());
        opt!("smat", self.materials.smat, |s: &String| s.clone());
        for (id, p) in &self.materials.inline {
            let mut t = format!("{id} {} {} {} {}", p.name, p.rho, p.vp, p.vs);
            if let Some((lo, hi)) = p.hu_range {
                write!(t, " {lo} {hi}").expect("string write");
            }
            line!("material", t);
        }
        let s = &self.solver;
        o.push_str("\n[solver]\n");
        opt!("degree", s.degree, |x: &usize| x.to_string());
        opt!("courant", s.courant, |x: &f64| x.to_string());
        opt!("t_end", s.t_end, |x: &f64| x.to_string());
        opt!("dt", s.dt, |x: &f64| x.to_string());
        opt!("blowup_interval", s.blowup_interval, |x: &usize| x.to_string());
        opt!("energy", s.energy, |x: &bool| x.to_string());
        o.push_str("\n[output]\n");
        opt!("dir", self.output.dir, |s: &String| s.clone());
        opt!("snapshot_every", self.output.snapshot_every, |x: &usize| x.to_string());
        for c in &self.sources {
            o.push_str("\n[source]\n");
            opt!("name", c.name, |s: &String| s.clone());
            line!("type", c.kind.name());
            opt!("position", c.position, v3);
            opt!("direction", c.direction, v3);
            opt!("f0", c.f0, |x: &f64| x.to_string());
            opt!("cycles", c.cycles, |x: &f64| x.to_string());
            opt!("tukey_alpha", c.tukey_alpha, |x: &f64| x.to_string());
            opt!("amplitude", c.amplitude, |x: &f64| x.to_string());
            opt!("delay", c.delay, |x: &f64| x.to_string());
            opt!("axis", c.axis, |a: &usize| axis_name(*a));
            opt!("plane", c.plane, |x: &f64| x.to_string());
            opt!("sign", c.sign, |x: &f64| x.to_string());
            opt!("center", c.center, |p: &[f64; 2]| format!("{} {}", p[0], p[1]));
            opt!("half_width", c.half_width, |x: &f64| x.to_string());
            opt!("spacing", c.spacing, |x: &f64| x.to_string());
            opt!("r_flat", c.r_flat, |x: &f64| x.to_string());
            opt!("sigma", c.sigma, |x: &f64| x.to_string());
        }
        for r in &self.receivers {
            o.push_str("\n[receiver]\n");
            line!("name", r.name);
            line!("position", v3(&r.position));
            opt!("channels", r.channels, |c: &Vec<Channel>| c.iter().map(|c| c.name()).collect::<Vec<_>>().join(" "));
        }
        let val = &self.validation;
        if *val != ValidationConfig::default() {
            o.push_str("\n[validation]\n");
            opt!("r1", val.r1, v3);
            opt!("r2", val.r2, v3);
            opt!("orientation", val.orientation, v3);
            opt!("distance", val.distance, |x: &f64| x.to_string());
            opt!("degrees", val.degrees, |d: &Vec<usize>| d.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "));
            opt!("mode", val.mode, |d: &[usize; 3]| format!("{} {} {}", d[0], d[1], d[2]));
        }
        o
    }

    /// SHA-256 of the canonical serialization, lowercase hex.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.serialize().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            write!(s, "{b:02x}").expect("string write");
            s
        })
    }
}

impl SourceConfig {
    fn empty(kind: SourceType) -> Self {
        SourceConfig {
            name: None,
            kind,
            position: None,
            direction: None,
            f0: None,
            cycles: None,
            tukey_alpha: None,
            amplitude: None,
            delay: None,
            axis: None,
            plane: None,
            sign: None,
            center: None,
            half_width: None,
            spacing: None,
            r_flat: None,
            sigma: None,
        }
    }

    pub fn new(kind: SourceType) -> Self {
        Self::empty(kind)
    }
}

#[cfg(test)]
mod tests;
