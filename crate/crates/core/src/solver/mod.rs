//! Explicit Newmark time stepping of the coupled fluid-solid system.
//!
//! Per step: predictor on both fields, fluid acceleration from the predicted
//! displacement, solid acceleration from the new fluid pressure, corrector.
//! Absorbing damping acts on the corrected velocity, which turns the mass
//! into M + dt/2·B (diagonal in the fluid, 3×3 blocks on solid boundary
//! nodes); a purely explicit damping term is unstable at boundary corners.

mod output;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use thiserror::Error;

pub use output::{read_snapshot, write_snapshot, Manifest, Snapshot, SNAP_MAGIC};

use crate::assembly::{AssemblyError, Discretization, FieldVectors};
use crate::excitation::{InjectedSource, LocatedReceiver, Seismogram};
use crate::gll::GllRule;
use crate::material::{MaterialError, MaterialTable};
use crate::mesh::{det3, element_min_gll_spacing, inv3, HexMesh};
use crate::numfmt::g17;

pub const DEFAULT_COURANT: f64 = 0.3;
pub const DEFAULT_BLOWUP_INTERVAL: usize = 50;
/// Any field magnitude above this counts as a blow-up.
pub const BLOWUP_THRESHOLD: f64 = 1e30;
/// Name of the marker file left in an output directory after a failed write.
pub const PARTIAL_MARKER: &str = "PARTIAL";

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("solution blew up at step {step}: {field}[{dof}] = {value}")]
    BlowUp { step: usize, field: &'static str, dof: usize, value: f64 },
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Uniform time discretization; samples are t_n = n·dt for n = 0..=n_steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
    pub t_end: f64,
    pub courant: f64,
}

impl TimeGrid {
    /// n_steps = ceil(t_end / dt), ignoring a relative excess below 1e-9.
    pub fn new(dt: f64, t_end: f64, courant: f64) -> Result<TimeGrid, SolverError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SolverError::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(SolverError::InvalidParameter(format!("t_end must be positive, got {t_end}")));
        }
        let n_steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
        Ok(TimeGrid { dt, n_steps, t_end, courant })
    }

    /// Grid with dt from the CFL rule.
    pub fn from_mesh(
        mesh: &HexMesh,
        table: &MaterialTable,
        rule: &GllRule,
        courant: f64,
        t_end: f64,
    ) -> Result<TimeGrid, SolverError> {
        TimeGrid::new(compute_dt(mesh, table, rule, courant)?, t_end, courant)
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }
}

/// dt = C · min over elements of (smallest GLL spacing / vp).
pub fn compute_dt(mesh: &HexMesh, table: &MaterialTable, rule: &GllRule, courant: f64) -> Result<f64, SolverError> {
    if !(courant > 0.0 && courant.is_finite()) {
        return Err(SolverError::InvalidParameter(format!("Courant number must be positive, got {courant}")));
    }
    if courant >= 1.0 {
        warn!("Courant number {courant} is outside (0, 1); the run is likely unstable");
    }
    let mut best = f64::INFINITY;
    for (e, el) in mesh.elements().iter().enumerate() {
        let vp = table.get(el.material)?.vp;
        best = best.min(element_min_gll_spacing(mesh, e, rule) / vp);
    }
    if !best.is_finite() {
        return Err(SolverError::InvalidParameter("mesh has no elements".into()));
    }
    Ok(courant * best)
}

/// Newmark predictor (β = 0, γ = ½): x += dt·v + dt²/2·a, v += dt/2·a.
pub fn newmark_predict(x: &mut [f64], v: &mut [f64], a: &[f64], dt: f64) {
    let h = 0.5 * dt * dt;
    for ((x, v), a) in x.iter_mut().zip(v.iter_mut()).zip(a) {
        *x += dt * *v + h * a;
        *v += 0.5 * dt * a;
    }
}

/// Newmark corrector: v += dt/2·a_new.
pub fn newmark_correct(v: &mut [f64], a: &[f64], dt: f64) {
    for (v, a) in v.iter_mut().zip(a) {
        *v += 0.5 * dt * a;
    }
}

/// Per-step diagnostics (index n is time t_n).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub max_phi_ddot: Vec<f64>,
    pub max_u_ddot: Vec<f64>,
    /// Empty unless energy tracking is enabled.
    pub energy: Vec<f64>,
    /// Rate of work of the absorbing terms at each step (never positive).
    pub stacey_power: Vec<f64>,
}

/// Time integration state for one discretized problem.
pub struct SolverRun<'a> {
    disc: &'a Discretization,
    pub grid: TimeGrid,
    pub state: FieldVectors,
    pub step: usize,
    sources: Vec<InjectedSource>,
    series: Vec<Vec<f64>>,
    receivers: Vec<LocatedReceiver>,
    pub seismogram: Seismogram,
    pub diagnostics: Diagnostics,
    pub blowup_interval: usize,
    track_energy: bool,
    inv_mass_fluid: Vec<f64>,
    inv_mass_solid: Vec<f64>,
    /// (M + dt/2·B)⁻¹ on absorbing solid nodes, row-major.
    inv_block_solid: Vec<(u32, [f64; 9])>,
    rhs_f: Vec<f64>,
    rhs_s: Vec<f64>,
    scratch_f: Vec<f64>,
}

impl<'a> SolverRun<'a> {
    /// Starts from the zero state.
    pub fn new(
        disc: &'a Discretization,
        grid: TimeGrid,
        sources: Vec<InjectedSource>,
        receivers: Vec<LocatedReceiver>,
    ) -> Self {
        Self::with_state(disc, grid, sources, receivers, disc.zero_fields())
    }

    /// Starts from given φ, φ̇, u, u̇; accelerations are recomputed.
    pub fn with_state(
        disc: &'a Discretization,
        grid: TimeGrid,
        sources: Vec<InjectedSource>,
        receivers: Vec<LocatedReceiver>,
        mut state: FieldVectors,
    ) -> Self {
        let series = sources.iter().map(|s| s.time_series(grid.dt, grid.n_steps)).collect();
        let nf = disc.dofmap().n_fluid();
        let ns = 3 * disc.dofmap().n_solid();
        let half = 0.5 * grid.dt;
        let mut inv_mass_fluid: Vec<f64> = disc.mass().fluid.iter().map(|m| 1.0 / m).collect();
        for &(f, c) in disc.stacey_fluid() {
            inv_mass_fluid[f as usize] = 1.0 / (disc.mass().fluid[f as usize] + half * c);
        }
        let inv_mass_solid = disc.mass().solid.iter().flat_map(|m| [1.0 / m; 3]).collect();
        let inv_block_solid = disc
            .stacey_solid()
            .iter()
            .map(|(s, a)| {
                let m = disc.mass().solid[*s as usize];
                let b = [
                    [m + half * a[0], half * a[3], half * a[4]],
                    [half * a[3], m + half * a[1], half * a[5]],
                    [half * a[4], half * a[5], m + half * a[2]],
                ];
                let inv = inv3(&b, det3(&b));
                (*s, [inv[0][0], inv[0][1], inv[0][2], inv[1][0], inv[1][1], inv[1][2], inv[2][0], inv[2][1], inv[2][2]])
            })
            .collect();
        disc.apply_symmetry(&mut state.u);
        disc.apply_symmetry(&mut state.u_dot);
        let seismogram = Seismogram::for_receivers(&receivers);
        let mut run = SolverRun {
            disc,
            grid,
            state,
            step: 0,
            sources,
            series,
            receivers,
            seismogram,
            diagnostics: Diagnostics::default(),
            blowup_interval: DEFAULT_BLOWUP_INTERVAL,
            track_energy: false,
            inv_mass_fluid,
            inv_mass_solid,
            inv_block_solid,
            rhs_f: vec![0.0; nf],
            rhs_s: vec![0.0; ns],
            scratch_f: vec![0.0; nf],
        };
        run.accelerations();
        run.record();
        run
    }

    /// Enables the per-step energy estimate (one extra stiffness product).
    pub fn track_energy(&mut self, on: bool) {
        self.track_energy = on;
        if on && self.diagnostics.energy.len() < self.diagnostics.max_phi_ddot.len() {
            let e = self.energy();
            self.diagnostics.energy.push(e);
        }
    }

    pub fn discretization(&self) -> &Discretization {
        self.disc
    }

    pub fn time(&self) -> f64 {
        self.grid.time(self.step)
    }

    /// φ̈ and ü at the current step from the current φ, φ̇, u, u̇.
    fn accelerations(&mut self) {
        let disc = self.disc;
        let st = &mut self.state;
        disc.apply_acoustic_stiffness(&st.phi, &mut self.rhs_f);
        // 0 − x keeps an all-zero state free of negative zeros.
        for v in self.rhs_f.iter_mut() {
            *v = 0.0 - *v;
        }
        disc.add_coupling_to_fluid(&st.u, &mut self.rhs_f);
        disc.add_stacey_fluid(&st.phi_dot, &mut self.rhs_f);
        disc.apply_elastic_stiffness(&st.u, &mut self.rhs_s);
        for v in self.rhs_s.iter_mut() {
            *v = 0.0 - *v;
        }
        disc.add_stacey_solid(&st.u_dot, &mut self.rhs_s);
        for (src, series) in self.sources.iter().zip(&self.series) {
            src.add_to(series[self.step], &mut self.rhs_f, &mut self.rhs_s);
        }
        for ((a, r), m) in st.phi_ddot.iter_mut().zip(&self.rhs_f).zip(&self.inv_mass_fluid) {
            *a = r * m;
        }
        disc.add_coupling_to_solid(&st.phi_ddot, &mut self.rhs_s);
        for ((a, r), m) in st.u_ddot.iter_mut().zip(&self.rhs_s).zip(&self.inv_mass_solid) {
            *a = r * m;
        }
        for (s, inv) in &self.inv_block_solid {
            let b = 3 * *s as usize;
            let r = [self.rhs_s[b], self.rhs_s[b + 1], self.rhs_s[b + 2]];
            for k in 0..3 {
                st.u_ddot[b + k] = inv[3 * k] * r[0] + inv[3 * k + 1] * r[1] + inv[3 * k + 2] * r[2];
            }
        }
        disc.apply_symmetry(&mut st.u_ddot);
    }

    fn record(&mut self) {
        let t = self.time();
        self.seismogram.record(t, &self.receivers, &self.state);
        let max = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        self.diagnostics.max_phi_ddot.push(max(&self.state.phi_ddot));
        self.diagnostics.max_u_ddot.push(max(&self.state.u_ddot));
        self.diagnostics.stacey_power.push(self.disc.stacey_power(&self.state.phi_dot, &self.state.u_dot));
        if self.track_energy {
            let e = self.energy();
            self.diagnostics.energy.push(e);
        }
    }

    /// Discrete energy of the current state,
    /// fluid ½φ̇·K_a φ̇ + ½φ̈·M_a φ̈ − dt²/8 φ̈·K_a φ̈ and
    /// solid ½u̇·M_e u̇ + ½u·K_e u − dt²/8 ü·M_e ü.
    ///
    /// Eliminating φ̈ from the staggered update gives a central-difference
    /// scheme whose operator is symmetrized by diag(K_a, M_e); this is the
    /// corresponding exact invariant of the closed, undamped, unforced scheme.
    pub fn energy(&mut self) -> f64 {
        let disc = self.disc;
        let st = &self.state;
        let dt = self.grid.dt;
        let mf = &disc.mass().fluid;
        let ms = &disc.mass().solid;
        let mut e = 0.0;
        disc.apply_acoustic_stiffness(&st.phi_dot, &mut self.scratch_f);
        for i in 0..mf.len() {
            e += 0.5 * mf[i] * st.phi_ddot[i] * st.phi_ddot[i] + 0.5 * st.phi_dot[i] * self.scratch_f[i];
        }
        disc.apply_acoustic_stiffness(&st.phi_ddot, &mut self.scratch_f);
        for i in 0..mf.len() {
            e -= dt * dt / 8.0 * st.phi_ddot[i] * self.scratch_f[i];
        }
        let mut ku = vec![0.0; st.u.len()];
        disc.apply_elastic_stiffness(&st.u, &mut ku);
        for i in 0..st.u.len() {
            let m = ms[i / 3];
            e += 0.5 * m * st.u_dot[i] * st.u_dot[i] + 0.5 * st.u[i] * ku[i]
                - dt * dt / 8.0 * m * st.u_ddot[i] * st.u_ddot[i];
        }
        e
    }

    /// Advances one step.
    pub fn step(&mut self) -> Result<(), SolverError> {
        if self.step >= self.grid.n_steps {
            return Err(SolverError::InvalidParameter("time grid exhausted".into()));
        }
        let dt = self.grid.dt;
        let st = &mut self.state;
        newmark_predict(&mut st.phi, &mut st.phi_dot, &st.phi_ddot, dt);
        newmark_predict(&mut st.u, &mut st.u_dot, &st.u_ddot, dt);
        self.step += 1;
        self.accelerations();
        let st = &mut self.state;
        newmark_correct(&mut st.phi_dot, &st.phi_ddot, dt);
        newmark_correct(&mut st.u_dot, &st.u_ddot, dt);
        if self.step % self.blowup_interval.max(1) == 0 || self.step == self.grid.n_steps {
            self.check_finite()?;
        }
        self.record();
        Ok(())
    }

    fn check_finite(&self) -> Result<(), SolverError> {
        let (m, bad) = self.state.max_abs();
        if let Some((field, dof)) = bad {
            return Err(SolverError::BlowUp { step: self.step, field, dof, value: f64::NAN });
        }
        if m > BLOWUP_THRESHOLD {
            let arrays: [(&'static str, &Vec<f64>); 6] = [
                ("phi", &self.state.phi),
                ("phi_dot", &self.state.phi_dot),
                ("phi_ddot", &self.state.phi_ddot),
                ("u", &self.state.u),
                ("u_dot", &self.state.u_dot),
                ("u_ddot", &self.state.u_ddot),
            ];
            for (field, a) in arrays {
                if let Some(dof) = a.iter().position(|v| v.abs() == m) {
                    return Err(SolverError::BlowUp { step: self.step, field, dof, value: a[dof] });
                }
            }
        }
        Ok(())
    }

    /// Steps to the end of the grid.
    pub fn run_to_end(&mut self) -> Result<(), SolverError> {
        while self.step < self.grid.n_steps {
            self.step()?;
        }
        Ok(())
    }
}

/// Output options for [`run_simulation`].
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Directory for traces, manifest and snapshots; nothing is written if unset.
    pub out_dir: Option<PathBuf>,
    /// Snapshot every k steps (including step 0); none if unset or zero.
    pub snapshot_every: Option<usize>,
    pub blowup_interval: Option<usize>,
    pub track_energy: bool,
    /// Entries copied into the run manifest ahead of the run statistics.
    pub manifest: Manifest,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seismogram: Seismogram,
    pub diagnostics: Diagnostics,
    pub manifest: Manifest,
    pub grid: TimeGrid,
}

pub const TRACE_FILE: &str = "traces.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const SNAPSHOT_DIR: &str = "snapshots";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SolverError + '_ {
    move |source| SolverError::Io { path: path.to_path_buf(), source }
}

fn mark_partial(dir: &Path, reason: &str) {
    if let Err(e) = fs::write(dir.join(PARTIAL_MARKER), format!("{reason}\n")) {
        warn!("could not write partial-output marker: {e}");
    }
}

/// Runs the full time loop, recording receivers every step, and writes the
/// outputs if an output directory is set. A failed write leaves a PARTIAL
/// marker next to whatever was written.
pub fn run_simulation(
    disc: &Discretization,
    grid: TimeGrid,
    sources: Vec<InjectedSource>,
    receivers: Vec<LocatedReceiver>,
    opts: &RunOptions,
) -> Result<RunOutput, SolverError> {
    let started = Instant::now();
    let n_receivers = receivers.len();
    let mut manifest = opts.manifest.clone();
    manifest.set("dt", g17(grid.dt));
    manifest.set("n_steps", grid.n_steps);
    manifest.set("t_end", g17(grid.t_end));
    manifest.set("courant", g17(grid.courant));
    manifest.set("dofs_fluid", disc.dofmap().n_fluid());
    manifest.set("dofs_solid", 3 * disc.dofmap().n_solid());
    manifest.set("dofs_interface", disc.dofmap().n_interface());
    manifest.set("threads", rayon::current_num_threads());
    for s in &sources {
        manifest.set(&format!("source.{}.calibration", s.name), s.calibration());
    }

    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let _ = fs::remove_file(dir.join(PARTIAL_MARKER));
    }
    let snap_every = opts.snapshot_every.filter(|&k| k > 0);
    let snap_dir = opts.out_dir.as_ref().map(|d| d.join(SNAPSHOT_DIR));
    if let (Some(_), Some(sd)) = (snap_every, &snap_dir) {
        fs::create_dir_all(sd).map_err(io_err(sd))?;
    }
    let write_snap = |run: &SolverRun| -> Result<(), SolverError> {
        if let (Some(k), Some(sd)) = (snap_every, &snap_dir) {
            if run.step % k == 0 {
                let path = sd.join(format!("snap_{:08}.snap1", run.step));
                let f = fs::File::create(&path).map_err(io_err(&path))?;
                write_snapshot(BufWriter::new(f), run.step as u64, run.time(), &run.state).map_err(io_err(&path))?;
            }
        }
        Ok(())
    };

    let mut run = SolverRun::new(disc, grid, sources, receivers);
    if let Some(b) = opts.blowup_interval {
        run.blowup_interval = b;
    }
    run.track_energy(opts.track_energy);
    let result = (|| {
        write_snap(&run)?;
        while run.step < grid.n_steps {
            run.step()?;
            write_snap(&run)?;
        }
        Ok(())
    })();
    let wall = started.elapsed().as_secs_f64();
    manifest.set("wall_seconds", g17(wall));
    manifest.set("steps_completed", run.step);
    manifest.set("status", match &result {
        Ok(()) => "ok".to_string(),
        Err(SolverError::BlowUp { .. }) => "blowup".to_string(),
        Err(_) => "io_error".to_string(),
    });
    info!("{} steps in {wall:.2} s", run.step);

    if let Some(dir) = &opts.out_dir {
        if let Err(e) = &result {
            if matches!(e, SolverError::Io { .. }) {
                mark_partial(dir, &e.to_string());
            }
        }
        let written = (|| {
            if n_receivers > 0 {
                let path = dir.join(TRACE_FILE);
                let f = fs::File::create(&path).map_err(io_err(&path))?;
                run.seismogram.write_csv(BufWriter::new(f)).map_err(io_err(&path))?;
            }
            let path = dir.join(MANIFEST_FILE);
            let f = fs::File::create(&path).map_err(io_err(&path))?;
            manifest.write(BufWriter::new(f)).map_err(io_err(&path))
        })();
        if let Err(e) = written {
            mark_partial(dir, &e.to_string());
            return Err(result.err().unwrap_or(e));
        }
    }
    result?;
    Ok(RunOutput { seismogram: run.seismogram, diagnostics: run.diagnostics, manifest, grid })
}
