//! `specwave`: command-line front end.
//!
//! Exit status: 0 success, 1 validation failure or run failure (blow-up,
//! I/O), 2 configuration or usage error.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use specwave_core::config::{ConfigError, Simulation, SimulationConfig};
use specwave_core::excitation::{Seismogram, SourceTimeFunction, DEFAULT_TUKEY_ALPHA};
use specwave_core::material::{builtin_dolphin_table, write_smat, MaterialTable};
use specwave_core::mesh::{quality_report, write_shex};
use specwave_core::numfmt::g17;
use specwave_core::solver::{Manifest, SolverError};
use specwave_core::validation::{
    absorbing_reflection_test, convergence_study, greens_oracle_test, interface_rt_test, reciprocity_test,
    AbsorbingParams, ColumnKind, ConvergenceParams, GreensParams, InterfaceParams, ReciprocityParams, ValidationError,
};

/// Reciprocity pass threshold, dB.
const RECIPROCITY_DB: f64 = -40.0;
/// Green's-function L2 misfit tolerance.
const GREENS_MISFIT: f64 = 0.02;
/// Absolute tolerance on the reflection coefficient.
const INTERFACE_TOL: f64 = 0.03;
/// |R| bound for the same-material control.
const CONTROL_TOL: f64 = 0.005;
/// Reflected/incident amplitude bound at an absorbing end.
const ABSORBING_TOL: f64 = 0.02;
/// Error reduction required per degree step.
const CONVERGENCE_RATIO: f64 = 10.0;

#[derive(Parser, Debug)]
#[command(name = "specwave", version, about = "Spectral-element acoustic-elastic wave solver")]
struct Cli {
    /// Simulation config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all available). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write a snapshot every k steps.
    #[arg(long, global = true)]
    snapshot_every: Option<usize>,
    /// Snap HU values outside every tissue range to the nearest range.
    #[arg(long, global = true)]
    hu_snap: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the configured simulation.
    Run,
    /// Build the mesh, write it as SHEX1 and report its quality.
    Mesh,
    /// Print a material table.
    Materials {
        /// The builtin dolphin-head table.
        #[arg(long)]
        builtin: bool,
    },
    /// Source-receiver reciprocity test on the configured mesh.
    Reciprocity,
    /// Spectral convergence study of a standing mode.
    Converge,
    /// Comparisons with closed-form solutions.
    Oracle {
        #[arg(long, value_enum, default_value_t = OracleKind::Greens)]
        which: OracleKind,
    },
    /// Print mesh, DOF and time-step summary without stepping.
    Info,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum OracleKind {
    Greens,
    Interface,
    Absorbing,
    All,
}

/// Failure classes, mapped onto exit codes.
enum Failure {
    Config(String),
    Run(String),
    Validation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Run(_) | Failure::Validation(_) => 1,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Solver(s) => s.into(),
            e => Failure::Config(e.to_string()),
        }
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidParameter(_) => Failure::Config(e.to_string()),
            e => Failure::Run(e.to_string()),
        }
    }
}

impl From<ValidationError> for Failure {
    fn from(e: ValidationError) -> Self {
        match e {
            ValidationError::Solver(s) => s.into(),
            e => Failure::Config(e.to_string()),
        }
    }
}

fn io_failure(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Run(format!("writing {}: {e}", path.display()))
}

/// Loaded config, its directory, and the hash reports embed.
struct Loaded {
    config: SimulationConfig,
    base: PathBuf,
}

impl Loaded {
    fn hash(&self) -> String {
        self.config.hash()
    }
}

fn load(cli: &Cli) -> Result<Option<Loaded>, Failure> {
    let Some(path) = &cli.config else { return Ok(None) };
    let config = SimulationConfig::load(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Some(Loaded { config, base }))
}

fn require(cli: &Cli, what: &str) -> Result<Loaded, Failure> {
    load(cli)?.ok_or_else(|| Failure::Config(format!("`{what}` needs --config <path>")))
}

fn out_dir(cli: &Cli, loaded: Option<&Loaded>) -> PathBuf {
    match (&cli.out, loaded) {
        (Some(d), _) => d.clone(),
        (None, Some(l)) => l.base.join(l.config.out_dir()),
        (None, None) => PathBuf::from(specwave_core::config::DEFAULT_OUT_DIR),
    }
}

fn write_report(dir: &Path, name: &str, report: &Manifest, traces: Option<&Seismogram>) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(io_failure(dir))?;
    let path = dir.join(format!("{name}_report.txt"));
    let f = fs::File::create(&path).map_err(io_failure(&path))?;
    report.write(BufWriter::new(f)).map_err(io_failure(&path))?;
    if let Some(s) = traces {
        let path = dir.join(format!("{name}_traces.csv"));
        let f = fs::File::create(&path).map_err(io_failure(&path))?;
        s.write_csv(BufWriter::new(f)).map_err(io_failure(&path))?;
    }
    info!("wrote {name} report to {}", dir.display());
    Ok(())
}

fn print_manifest(m: &Manifest) {
    let stdout = io::stdout();
    let _ = m.write(stdout.lock());
}

fn cmd_run(cli: &Cli) -> Result<(), Failure> {
    let loaded = require(cli, "run")?;
    let sim = Simulation::build(loaded.config.clone(), &loaded.base, cli.hu_snap)?;
    let mut opts = sim.run_options(&loaded.base);
    opts.out_dir = Some(out_dir(cli, Some(&loaded)));
    if cli.snapshot_every.is_some() {
        opts.snapshot_every = cli.snapshot_every;
    }
    info!("{} elements, dt {}, {} steps", sim.mesh.n_elements(), g17(sim.grid.dt), sim.grid.n_steps);
    let out = sim.run(&opts)?;
    println!("status=ok");
    println!("steps={}", out.grid.n_steps);
    println!("out_dir={}", opts.out_dir.as_deref().unwrap_or(Path::new("")).display());
    Ok(())
}

fn cmd_mesh(cli: &Cli) -> Result<(), Failure> {
    let loaded = require(cli, "mesh")?;
    let table = loaded.config.material_table(&loaded.base)?;
    let mesh = loaded.config.build_mesh(&loaded.base, &table, cli.hu_snap)?;
    let quality = quality_report(&mesh).map_err(|e| Failure::Config(e.to_string()))?;
    let dir = out_dir(cli, Some(&loaded));
    fs::create_dir_all(&dir).map_err(io_failure(&dir))?;
    let path = dir.join("mesh.shex");
    let f = fs::File::create(&path).map_err(io_failure(&path))?;
    write_shex(&mesh, BufWriter::new(f)).map_err(io_failure(&path))?;
    let mut m = Manifest::new();
    m.set("config_hash", loaded.hash());
    m.set("elements", mesh.n_elements());
    m.set("nodes", mesh.nodes().len());
    m.set("quality_average", g17(quality.average));
    m.set("quality_std_dev", g17(quality.std_dev));
    m.set("quality_min", g17(quality.min));
    m.set("quality_max", g17(quality.max));
    m.set("quality_warnings", quality.warnings.len());
    m.set("mesh_file", path.display());
    write_report(&dir, "mesh", &m, None)?;
    print_manifest(&m);
    Ok(())
}

fn cmd_materials(cli: &Cli, builtin: bool) -> Result<(), Failure> {
    let table: MaterialTable = if builtin {
        builtin_dolphin_table()
    } else {
        let loaded = require(cli, "materials")?;
        loaded.config.material_table(&loaded.base)?
    };
    let stdout = io::stdout();
    write_smat(&table, stdout.lock()).map_err(|e| Failure::Run(e.to_string()))
}

fn cmd_info(cli: &Cli) -> Result<(), Failure> {
    let loaded = require(cli, "info")?;
    let sim = Simulation::build(loaded.config, &loaded.base, cli.hu_snap)?;
    let dm = sim.disc.dofmap();
    let mut m = sim.manifest.clone();
    m.set("gll_points_per_element", dm.n_points_1d().pow(3));
    m.set("global_nodes", dm.n_nodes());
    m.set("dofs_fluid", dm.n_fluid());
    m.set("dofs_solid", 3 * dm.n_solid());
    m.set("dofs_interface", dm.n_interface());
    m.set("courant", g17(sim.grid.courant));
    m.set("dt", g17(sim.grid.dt));
    m.set("t_end", g17(sim.grid.t_end));
    m.set("n_steps", sim.grid.n_steps);
    m.set("sources", sim.sources.len());
    m.set("receivers", sim.receivers.len());
    print_manifest(&m);
    Ok(())
}

/// Burst of the first configured source, or the default burst.
fn stf_of(config: &SimulationConfig) -> Result<SourceTimeFunction, Failure> {
    if config.sources.is_empty() {
        return SourceTimeFunction::tone_burst(
            specwave_core::config::DEFAULT_F0,
            specwave_core::config::DEFAULT_CYCLES,
            DEFAULT_TUKEY_ALPHA,
        )
        .map_err(|e| Failure::Config(e.to_string()));
    }
    Ok(config.source_stf(0)?)
}

fn verdict(name: &str, pass: bool) -> Result<(), Failure> {
    if pass {
        println!("{name}: PASS");
        Ok(())
    } else {
        println!("{name}: FAIL");
        Err(Failure::Validation(format!("{name} check failed")))
    }
}

fn cmd_reciprocity(cli: &Cli) -> Result<(), Failure> {
    let loaded = require(cli, "reciprocity")?;
    let v = &loaded.config.validation;
    let (Some(r1), Some(r2)) = (v.r1, v.r2) else {
        return Err(Failure::Config("reciprocity needs r1 and r2 in [validation]".into()));
    };
    let params = ReciprocityParams { r1, r2, orientation: v.orientation.unwrap_or([0.0, 0.0, 1.0]), stf: stf_of(&loaded.config)? };
    let sim = Simulation::build(loaded.config.clone(), &loaded.base, cli.hu_snap)?;
    let result = reciprocity_test(&sim.mesh, &sim.disc, sim.grid, &params)?;
    let report = result.report(&loaded.hash(), RECIPROCITY_DB);
    write_report(&out_dir(cli, Some(&loaded)), "reciprocity", &report, Some(&result.seismogram()))?;
    print_manifest(&report);
    verdict("reciprocity", result.passes(RECIPROCITY_DB))
}

fn cmd_converge(cli: &Cli) -> Result<(), Failure> {
    let loaded = load(cli)?;
    let mut params = ConvergenceParams::default();
    let mut hash = String::from("none");
    if let Some(l) = &loaded {
        let v = &l.config.validation;
        if let Some(d) = &v.degrees {
            params.degrees = d.clone();
        }
        if let Some(m) = v.mode {
            params.mode = m;
        }
        if let Some(c) = l.config.solver.courant {
            params.courant = c;
        }
        hash = l.hash();
    }
    let table = match &loaded {
        Some(l) => l.config.material_table(&l.base)?,
        None => builtin_dolphin_table(),
    };
    let study = convergence_study(&params, &table)?;
    let report = study.report(&hash, CONVERGENCE_RATIO);
    write_report(&out_dir(cli, loaded.as_ref()), "convergence", &report, None)?;
    print_manifest(&report);
    for r in &study.rows {
        if r.dt_limited && r.degree == study.rows[0].degree {
            eprintln!("time error dominates at N = {}: lower the Courant number", r.degree);
        }
    }
    verdict("convergence", study.passes(CONVERGENCE_RATIO))
}

fn cmd_oracle(cli: &Cli, which: OracleKind) -> Result<(), Failure> {
    let loaded = load(cli)?;
    let hash = loaded.as_ref().map_or_else(|| "none".to_string(), Loaded::hash);
    let table = match &loaded {
        Some(l) => l.config.material_table(&l.base)?,
        None => builtin_dolphin_table(),
    };
    // Burst parameters from the first configured source, if any.
    let stf = loaded.as_ref().map(|l| stf_of(&l.config)).transpose()?;
    let dir = out_dir(cli, loaded.as_ref());
    let mut ok = true;

    if matches!(which, OracleKind::Greens | OracleKind::All) {
        let mut p = GreensParams::default();
        if let Some(l) = &loaded {
            if let Some(d) = l.config.validation.distance {
                p.distance = d;
            }
            if let Some(n) = l.config.solver.degree {
                p.degree = n;
            }
            if let Some(c) = l.config.solver.courant {
                p.courant = c;
            }
        }
        if let Some(s) = &stf {
            (p.f0, p.cycles, p.tukey_alpha, p.amplitude) = (s.f0, s.n_cycles, s.tukey_alpha, s.amplitude);
        }
        let r = greens_oracle_test(&p, &table)?;
        let report = r.report(&hash, GREENS_MISFIT);
        write_report(&dir, "greens", &report, Some(&r.seismogram()))?;
        print_manifest(&report);
        ok &= verdict("greens", r.passes(GREENS_MISFIT)).is_ok();
    }
    if matches!(which, OracleKind::Interface | OracleKind::All) {
        for (label, second) in [("interface", None), ("interface_control", Some(()))] {
            let mut p = InterfaceParams::default();
            if let Some(s) = &stf {
                (p.f0, p.cycles, p.tukey_alpha) = (s.f0, s.n_cycles, s.tukey_alpha);
            }
            if second.is_some() {
                p.second = p.incident;
            }
            let r = interface_rt_test(&p, &table)?;
            let tol = if second.is_some() { CONTROL_TOL } else { INTERFACE_TOL };
            let report = r.report(&hash, tol);
            write_report(&dir, label, &report, Some(&r.traces))?;
            print_manifest(&report);
            ok &= verdict(label, r.r_error() <= tol).is_ok();
        }
    }
    if matches!(which, OracleKind::Absorbing | OracleKind::All) {
        for (label, kind) in [("absorbing_fluid", ColumnKind::Fluid), ("absorbing_solid", ColumnKind::Solid)] {
            let mut p = AbsorbingParams::new(kind);
            if let Some(s) = &stf {
                (p.f0, p.cycles, p.tukey_alpha) = (s.f0, s.n_cycles, s.tukey_alpha);
            }
            let r = absorbing_reflection_test(&p, &table)?;
            let report = r.report(&hash, ABSORBING_TOL);
            write_report(&dir, label, &report, Some(&r.traces))?;
            print_manifest(&report);
            ok &= verdict(label, r.ratio <= ABSORBING_TOL && r.max_boundary_flux <= 0.0).is_ok();
        }
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Validation("oracle comparison failed".into()))
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Run => cmd_run(cli),
        Command::Mesh => cmd_mesh(cli),
        Command::Materials { builtin } => cmd_materials(cli, *builtin),
        Command::Reciprocity => cmd_reciprocity(cli),
        Command::Converge => cmd_converge(cli),
        Command::Oracle { which } => cmd_oracle(cli, *which),
        Command::Info => cmd_info(cli),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            if !e.to_string().contains("Usage:") {
                eprintln!("\n{}", <Cli as clap::CommandFactory>::command().render_usage());
            }
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set up {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = dispatch(&cli);
    let _ = io::stdout().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("configuration error: {m}"),
                Failure::Run(m) => eprintln!("error: {m}"),
                Failure::Validation(m) => eprintln!("validation failed: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
