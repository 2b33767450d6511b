//! Turns a parsed configuration into a ready-to-run simulation.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use super::{
    ConfigError, SimulationConfig, SourceType, DEFAULT_CYCLES, DEFAULT_F0, DEFAULT_R_FLAT_FRACTION,
    DEFAULT_SIGMA_FRACTION,
};
use crate::assembly::Discretization;
use crate::excitation::{
    build_plane_wave_array, locate_point, Channel, ExcitationError, InjectedSource, LocatedReceiver, PlaneWaveSpec,
    PointSource, ReceiverSpec, SourceKind, SourceTimeFunction, DEFAULT_TUKEY_ALPHA,
};
use crate::material::{builtin_dolphin_table, read_smat, DomainKind, MaterialTable, WATER_ID};
use crate::mesh::{quality_report, read_shex, read_svox, voxels_to_hexmesh, BoundaryPolicy, HexMesh, VoxelVolume};
use crate::numfmt::g17;
use crate::solver::{compute_dt, run_simulation, Manifest, RunOptions, RunOutput, SolverError, TimeGrid};

/// Everything needed to step a configured run.
pub struct Simulation {
    pub config: SimulationConfig,
    pub mesh: HexMesh,
    pub table: MaterialTable,
    pub disc: Discretization,
    pub grid: TimeGrid,
    pub sources: Vec<InjectedSource>,
    pub receivers: Vec<LocatedReceiver>,
    /// Config hash, applied defaults and setup summary.
    pub manifest: Manifest,
}

fn open(base: &Path, rel: &str) -> Result<(PathBuf, BufReader<File>), ConfigError> {
    let path = base.join(rel);
    let f = File::open(&path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
    Ok((path, BufReader::new(f)))
}

impl SimulationConfig {
    /// Builtin table unless disabled or replaced by an SMAT1 file, then the
    /// inline `material` lines.
    pub fn material_table(&self, base_dir: &Path) -> Result<MaterialTable, ConfigError> {
        let m = &self.materials;
        let use_builtin = match m.builtin.as_deref() {
            Some("dolphin") => true,
            Some(_) => false,
            None => m.smat.is_none(),
        };
        let mut table = if use_builtin { builtin_dolphin_table() } else { MaterialTable::default() };
        if let Some(rel) = &m.smat {
            let (_, r) = open(base_dir, rel)?;
            for (id, p) in read_smat(r)?.iter() {
                table.insert(id, p.clone())?;
            }
        }
        for (id, p) in &m.inline {
            table.insert(*id, p.clone())?;
        }
        Ok(table)
    }

    /// Mesh described by `[mesh]`, `[region]` and `[boundary]`.
    pub fn build_mesh(&self, base_dir: &Path, table: &MaterialTable, hu_snap: bool) -> Result<HexMesh, ConfigError> {
        let m = &self.mesh;
        if let Some(rel) = &m.shex {
            let (_, r) = open(base_dir, rel)?;
            return Ok(read_shex(r)?);
        }
        let mut vol = if let Some(rel) = &m.svox {
            let (_, r) = open(base_dir, rel)?;
            let data = read_svox(r)?;
            table.classify_voxels(&data, hu_snap || m.hu_snap.unwrap_or(false))?
        } else if let Some(dims) = m.dims {
            VoxelVolume::uniform(dims, m.spacing.expect("validated"), m.material.unwrap_or(WATER_ID))
        } else {
            return Err(ConfigError::Missing("mesh source in [mesh] (shex, svox or dims)".into()));
        };
        vol.origin = m.origin.unwrap_or([0.0; 3]);
        for r in &self.regions {
            vol.fill_box(r.min, r.max, r.material);
        }
        let policy = BoundaryPolicy { sides: std::array::from_fn(|s| self.boundary_kind(s)) };
        Ok(voxels_to_hexmesh(&vol, &policy)?)
    }

    pub fn source_stf(&self, i: usize) -> Result<SourceTimeFunction, ConfigError> {
        let s = &self.sources[i];
        Ok(SourceTimeFunction::tone_burst(
            s.f0.unwrap_or(DEFAULT_F0),
            s.cycles.unwrap_or(DEFAULT_CYCLES),
            s.tukey_alpha.unwrap_or(DEFAULT_TUKEY_ALPHA),
        )?
        .with_amplitude(s.amplitude.unwrap_or(1.0))
        .with_delay(s.delay.unwrap_or(0.0)))
    }

    /// Point sources making up source `i`.
    pub fn source_points(&self, i: usize, mesh: &HexMesh, table: &MaterialTable) -> Result<Vec<PointSource>, ConfigError> {
        let s = &self.sources[i];
        let name = self.source_name(i);
        let stf = self.source_stf(i)?;
        Ok(match s.kind {
            SourceType::Pressure => {
                vec![PointSource { name, position: s.position.expect("validated"), kind: SourceKind::Pressure, stf }]
            }
            SourceType::Force => vec![PointSource {
                name,
                position: s.position.expect("validated"),
                kind: SourceKind::Force { direction: s.direction.expect("validated") },
                stf,
            }],
            SourceType::PlaneWave => {
                let hw = s.half_width.expect("validated");
                let spec = PlaneWaveSpec {
                    name,
                    axis: s.axis.expect("validated"),
                    position: s.plane.expect("validated"),
                    direction: s.sign.unwrap_or(-1.0),
                    center: s.center.expect("validated"),
                    half_width: hw,
                    spacing: s.spacing.expect("validated"),
                    r_flat: s.r_flat.unwrap_or(DEFAULT_R_FLAT_FRACTION * hw),
                    sigma: s.sigma.unwrap_or(DEFAULT_SIGMA_FRACTION * hw),
                    stf,
                };
                build_plane_wave_array(&spec, mesh, table)?
            }
        })
    }
}

impl Simulation {
    /// Builds mesh, discretization, time grid, sources and receivers.
    /// Relative paths resolve against `base_dir`; `hu_snap` forces HU
    /// snapping regardless of the config.
    pub fn build(config: SimulationConfig, base_dir: &Path, hu_snap: bool) -> Result<Simulation, ConfigError> {
        let table = config.material_table(base_dir)?;
        let mesh = config.build_mesh(base_dir, &table, hu_snap)?;
        for el in mesh.elements() {
            table.get(el.material)?;
        }
        let quality = quality_report(&mesh)?;
        let disc = Discretization::build(&mesh, &table, config.degree())?;
        let courant = config.courant();
        let dt = match config.solver.dt {
            Some(dt) => dt,
            None => compute_dt(&mesh, &table, disc.rule(), courant)?,
        };
        let grid = TimeGrid::new(dt, config.t_end(), courant)?;

        let mut sources = Vec::with_capacity(config.sources.len());
        for i in 0..config.sources.len() {
            let points = config.source_points(i, &mesh, &table)?;
            sources.push(InjectedSource::from_points(&config.source_name(i), &points, &mesh, &disc)?);
        }
        let mut receivers = Vec::with_capacity(config.receivers.len());
        for r in &config.receivers {
            let channels = match &r.channels {
                Some(c) => c.clone(),
                None => {
                    let (e, _) = locate_point(&mesh, r.position).ok_or_else(|| ExcitationError::Placement {
                        what: "receiver",
                        name: r.name.clone(),
                        position: r.position,
                    })?;
                    match disc.dofmap().element_kind(e) {
                        DomainKind::Acoustic => vec![Channel::Pressure],
                        DomainKind::Elastic => vec![Channel::Vx, Channel::Vy, Channel::Vz],
                    }
                }
            };
            let spec = ReceiverSpec { name: r.name.clone(), position: r.position, channels };
            receivers.push(LocatedReceiver::locate(&spec, &mesh, &disc)?);
        }

        let mut manifest = Manifest::new();
        manifest.set("config_hash", config.hash());
        for (k, v) in config.applied_defaults() {
            manifest.set(&k, v);
        }
        manifest.set("degree", config.degree());
        manifest.set("elements", mesh.n_elements());
        manifest.set("nodes", mesh.nodes().len());
        manifest.set("quality_min", g17(quality.min));
        manifest.set("quality_warnings", quality.warnings.len());
        manifest.set("cfl_dt", g17(compute_dt(&mesh, &table, disc.rule(), courant)?));
        Ok(Simulation { config, mesh, table, disc, grid, sources, receivers, manifest })
    }

    /// Reads, parses and builds `path`, resolving files next to it.
    pub fn from_file(path: &Path, hu_snap: bool) -> Result<Simulation, ConfigError> {
        let config = SimulationConfig::load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Simulation::build(config, base, hu_snap)
    }

    /// Run options from the config; `out_dir` relative to `base_dir`.
    pub fn run_options(&self, base_dir: &Path) -> RunOptions {
        RunOptions {
            out_dir: Some(base_dir.join(self.config.out_dir())),
            snapshot_every: self.config.output.snapshot_every,
            blowup_interval: Some(self.config.blowup_interval()),
            track_energy: self.config.solver.energy.unwrap_or(false),
            manifest: self.manifest.clone(),
        }
    }

    /// Steps to t_end. The config manifest entries lead the run manifest.
    pub fn run(&self, opts: &RunOptions) -> Result<RunOutput, SolverError> {
        let mut opts = opts.clone();
        let mut manifest = self.manifest.clone();
        manifest.extend(&opts.manifest);
        opts.manifest = manifest;
        run_simulation(&self.disc, self.grid, self.sources.clone(), self.receivers.clone(), &opts)
    }
}
