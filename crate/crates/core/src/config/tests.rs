use super::*;
use crate::material::{write_smat, MaterialTable, BONE_ID, WATER_ID};
use crate::mesh::{write_svox, SvoxData};

const MINIMAL: &str = "
[mesh]
dims = 4 4 4
spacing = 2.5e-3

[source]
type = pressure
position = 5e-3 5e-3 5e-3

[receiver]
name = r1
position = 7.5e-3 5e-3 5e-3
";

const FULL: &str = "
# every section, most keys
[mesh]
dims = 8 4 4
spacing = 1e-3 1e-3 2e-3
origin = -1 0 0.5
material = 5
hu_snap = true

[region]
min = -1 0 0
max = -0.996 1 1
material = 4

[boundary]
default = free
xmin = absorbing
zmax = symmetry

[materials]
builtin = dolphin
material = 10 gel 1100 1550 0 -5 5

[solver]
degree = 3
courant = 0.25
t_end = 1e-5
dt = 1.1e-7
blowup_interval = 10
energy = true

[output]
dir = results/a
snapshot_every = 20

[source]
name = pw
type = plane_wave
axis = x
plane = -0.9985
sign = 1
center = 2e-3 4.5e-3
half_width = 1.5e-3
spacing = 1e-3
r_flat = 0.5e-3
sigma = 0.3e-3
f0 = 200000
cycles = 3
tukey_alpha = 0.2
amplitude = 2.5
delay = 1e-6

[source]
type = force
position = -0.9975 2e-3 3e-3
direction = 0 0 1

[receiver]
name = a
position = -0.995 2e-3 3e-3
channels = pressure vx

[validation]
r1 = 1 2 3
r2 = 4 5 6
orientation = 0 1 0
distance = 0.1
degrees = 2 4 6
mode = 1 1 1
";

#[test]
fn minimal_config_fills_defaults() {
    let cfg = SimulationConfig::parse_str(MINIMAL).unwrap();
    assert_eq!(cfg.degree(), 2);
    assert_eq!(cfg.courant(), 0.3);
    assert_eq!(cfg.t_end(), 0.7e-3);
    assert_eq!(cfg.out_dir(), "out");
    assert_eq!(cfg.source_name(0), "source1");
    assert_eq!(cfg.boundary_kind(3), BoundaryKind::Absorbing);
    let d = cfg.applied_defaults();
    for key in ["default.solver.degree", "default.solver.courant", "default.source.source1.tukey_alpha", "default.boundary.zmax"] {
        assert!(d.iter().any(|(k, _)| k == key), "{key} missing from {d:?}");
    }
}

#[test]
fn full_config_round_trips() {
    let cfg = SimulationConfig::parse_str(FULL).unwrap();
    assert_eq!(cfg.mesh.spacing, Some([1e-3, 1e-3, 2e-3]));
    assert_eq!(cfg.boundary_kind(0), BoundaryKind::Absorbing);
    assert_eq!(cfg.boundary_kind(1), BoundaryKind::Free);
    assert_eq!(cfg.boundary_kind(5), BoundaryKind::Symmetry);
    assert_eq!(cfg.sources[0].axis, Some(0));
    assert_eq!(cfg.sources[1].kind, SourceType::Force);
    assert_eq!(cfg.receivers[0].channels, Some(vec![Channel::Pressure, Channel::Vx]));
    assert_eq!(cfg.materials.inline[0].1.hu_range, Some((-5.0, 5.0)));
    let text = cfg.serialize();
    let again = SimulationConfig::parse_str(&text).unwrap();
    assert_eq!(again, cfg);
    assert_eq!(again.serialize(), text);
    assert_eq!(again.hash(), cfg.hash());
    assert_eq!(cfg.hash().len(), 64);
    assert_ne!(SimulationConfig::parse_str(MINIMAL).unwrap().hash(), cfg.hash());
}

#[test]
fn comments_and_whitespace_do_not_change_the_hash() {
    let a = SimulationConfig::parse_str(MINIMAL).unwrap();
    let noisy = MINIMAL.replace("dims = 4 4 4", "  dims=4   4 4   # grid\n# comment");
    let b = SimulationConfig::parse_str(&noisy).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.hash(), b.hash());
}

fn err(text: &str) -> ConfigError {
    SimulationConfig::parse_str(text).unwrap_err()
}

#[test]
fn unknown_keys_are_named_with_their_line() {
    match err("[mesh]\ndims = 1 1 1\nspacing = 1\n\n[solver]\ncourrant = 0.3\n") {
        ConfigError::UnknownKey { key, section, line } => {
            assert_eq!((key.as_str(), section.as_str(), line), ("courrant", "solver", 6));
        }
        e => panic!("unexpected {e}"),
    }
    let msg = err("[solver]\nfoo = 1\n").to_string();
    assert!(msg.contains("foo") && msg.contains("line 2"), "{msg}");
    assert!(matches!(err("[solvers]\n"), ConfigError::UnknownSection { line: 1, .. }));
    assert!(matches!(err("degree = 2\n"), ConfigError::Syntax { line: 1, .. }));
    assert!(matches!(err("[solver]\ndegree 2\n"), ConfigError::Syntax { line: 2, .. }));
    assert!(matches!(err("[solver]\ndegree = 2\ndegree = 3\n"), ConfigError::DuplicateKey { line: 3, .. }));
    assert!(matches!(err("[solver]\n[solver]\n"), ConfigError::Syntax { line: 2, .. }));
}

#[test]
fn physically_invalid_values_are_range_errors() {
    let bad_vs = "[materials]\nmaterial = 9 odd 1000 1500 1600\n";
    assert!(matches!(err(bad_vs), ConfigError::Range { .. }), "{}", err(bad_vs));
    assert!(matches!(err("[materials]\nmaterial = 9 odd -1000 1500 0\n"), ConfigError::Range { .. }));
    for bad in [
        "[solver]\nt_end = 0\n",
        "[solver]\nt_end = -1e-3\n",
        "[solver]\ncourant = -0.3\n",
        "[solver]\ndegree = 11\n",
        "[solver]\ndegree = 0\n",
        "[solver]\nblowup_interval = 0\n",
        "[mesh]\ndims = 0 1 1\nspacing = 1\n",
        "[mesh]\ndims = 1 1 1\nspacing = 1 -1 1\n",
        "[source]\ntype = force\nposition = 0 0 0\ndirection = 1 1 0\n",
        "[source]\ntype = pressure\nposition = 0 0 0\ntukey_alpha = 1.5\n",
        "[source]\ntype = pressure\nposition = 0 0 0\nf0 = nan\n",
        "[receiver]\nname = a b\nposition = 0 0 0\n",
        "[receiver]\nname = a\nposition = 0 0 0\nchannels = vx vx\n",
    ] {
        assert!(matches!(err(bad), ConfigError::Value { .. } | ConfigError::Range { .. }), "{bad:?} -> {}", err(bad));
    }
}

#[test]
fn incomplete_blocks_are_reported() {
    assert!(matches!(err("[source]\nposition = 0 0 0\n"), ConfigError::Missing(_)));
    assert!(matches!(err("[source]\ntype = force\nposition = 0 0 0\n"), ConfigError::Missing(_)));
    assert!(matches!(err("[source]\ntype = plane_wave\naxis = z\n"), ConfigError::Missing(_)));
    assert!(matches!(err("[receiver]\nname = a\n"), ConfigError::Missing(_)));
    assert!(matches!(err("[region]\nmin = 0 0 0\nmax = 1 1 1\n"), ConfigError::Missing(_)));
    assert!(matches!(err("[mesh]\ndims = 1 1 1\n"), ConfigError::Missing(_)));
    assert!(matches!(err("[mesh]\nshex = a.shex\nsvox = b.svox\n"), ConfigError::Range { .. }));
    assert!(matches!(err("[mesh]\nshex = a.shex\n[boundary]\ndefault = free\n"), ConfigError::Range { .. }));
    let dup = "[receiver]\nname = a\nposition = 0 0 0\n[receiver]\nname = a\nposition = 1 0 0\n";
    assert!(matches!(err(dup), ConfigError::Range { .. }));
}

#[test]
fn forty_khz_plane_wave_experiment_is_accepted() {
    // 40 kHz, 4-cycle plane wave for 0.7 ms in a water box.
    let text = "
[mesh]
dims = 8 8 8
spacing = 5e-3

[solver]
t_end = 0.7e-3

[source]
type = plane_wave
axis = z
plane = 35e-3
center = 20e-3 20e-3
half_width = 15e-3
spacing = 5e-3
f0 = 40e3
cycles = 4
";
    let cfg = SimulationConfig::parse_str(text).unwrap();
    let sim = Simulation::build(cfg, Path::new("."), false).unwrap();
    let expected_dt = 0.3 * 2.5e-3 / 1480.0;
    assert!((sim.grid.dt - expected_dt).abs() <= 1e-12 * expected_dt, "{} vs {expected_dt}", sim.grid.dt);
    assert_eq!(sim.grid.n_steps, (0.7e-3 / expected_dt - 1e-9).ceil() as usize);
    assert_eq!(sim.sources.len(), 1);
    assert_eq!(sim.manifest.get("elements"), Some("512"));
    assert_eq!(sim.manifest.get("config_hash"), Some(sim.config.hash().as_str()));
    assert!(sim.manifest.get("default.source.source1.sign").is_some());
}

#[test]
fn regions_boundaries_and_receiver_defaults() {
    let text = "
[mesh]
dims = 4 2 2
spacing = 1e-3

[region]
min = 2e-3 0 0
max = 4e-3 2e-3 2e-3
material = 4

[boundary]
default = free
xmax = symmetry

[solver]
t_end = 1e-6

[receiver]
name = f
position = 1e-3 1e-3 1e-3

[receiver]
name = s
position = 3e-3 1e-3 1e-3
";
    let sim = Simulation::build(SimulationConfig::parse_str(text).unwrap(), Path::new("."), false).unwrap();
    let mats: Vec<u32> = sim.mesh.elements().iter().map(|e| e.material).collect();
    assert_eq!(mats.iter().filter(|&&m| m == BONE_ID).count(), 8);
    assert_eq!(mats.iter().filter(|&&m| m == WATER_ID).count(), 8);
    assert_eq!(sim.mesh.face_set("symmetry").len(), 4);
    assert!(sim.mesh.face_set("absorbing").is_empty());
    assert_eq!(sim.receivers[0].spec.channels, vec![Channel::Pressure]);
    assert_eq!(sim.receivers[1].spec.channels, vec![Channel::Vx, Channel::Vy, Channel::Vz]);
}

#[test]
fn build_errors() {
    let build = |t: &str| Simulation::build(SimulationConfig::parse_str(t).unwrap(), Path::new("."), false);
    let grid = "[mesh]\ndims = 2 2 2\nspacing = 1e-3\n";
    assert!(matches!(build(&format!("{grid}material = 77\n")), Err(ConfigError::Material(_))));
    let outside = format!("{grid}[receiver]\nname = r\nposition = 5 5 5\n");
    assert!(matches!(build(&outside), Err(ConfigError::Excitation(_))));
    let solid_p = format!("{grid}material = 4\n[receiver]\nname = r\nposition = 1e-3 1e-3 1e-3\nchannels = pressure\n");
    assert!(matches!(build(&solid_p), Err(ConfigError::Excitation(ExcitationError::DomainMismatch { .. }))));
    let missing = "[mesh]\nshex = no/such/file.shex\n";
    assert!(matches!(build(missing), Err(ConfigError::Io { .. })));
    assert!(matches!(build("[solver]\ndegree = 2\n"), Err(ConfigError::Missing(_))));
}

#[test]
fn files_resolve_against_the_base_directory() {
    let dir = tempfile::tempdir().unwrap();
    let mut table = MaterialTable::default();
    table.insert(1, TissueProperties::new("water", 1000.0, 1500.0, 0.0, Some((-10.0, 10.0))).unwrap()).unwrap();
    table.insert(2, TissueProperties::new("rock", 2000.0, 3000.0, 1500.0, Some((500.0, 900.0))).unwrap()).unwrap();
    write_smat(&table, std::fs::File::create(dir.path().join("t.smat")).unwrap()).unwrap();
    let data = SvoxData { dims: [2, 1, 1], spacing: [1e-3; 3], values: vec![0.0, 450.0] };
    write_svox(&data, std::fs::File::create(dir.path().join("v.svox")).unwrap()).unwrap();
    let text = "[mesh]\nsvox = v.svox\n[materials]\nsmat = t.smat\n[solver]\nt_end = 1e-6\n";
    std::fs::write(dir.path().join("c.cfg"), text).unwrap();
    // 450 HU falls in the gap between the two ranges.
    assert!(matches!(Simulation::from_file(&dir.path().join("c.cfg"), false), Err(ConfigError::Material(_))));
    let sim = Simulation::from_file(&dir.path().join("c.cfg"), true).unwrap();
    assert_eq!(sim.table.len(), 2);
    let mats: Vec<u32> = sim.mesh.elements().iter().map(|e| e.material).collect();
    assert_eq!(mats, vec![1, 2]);
    assert!(sim.manifest.get("default.materials.builtin").is_none());
}

#[test]
fn zero_source_run_writes_zero_traces() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[mesh]\ndims = 2 2 2\nspacing = 1e-3\n[solver]\nt_end = 2e-6\n[receiver]\nname = r\nposition = 1e-3 1e-3 1e-3\n";
    let sim = Simulation::build(SimulationConfig::parse_str(text).unwrap(), dir.path(), false).unwrap();
    let out = sim.run(&sim.run_options(dir.path())).unwrap();
    assert!(out.seismogram.channel("r_pressure").unwrap().iter().all(|v| *v == 0.0));
    let manifest = std::fs::read_to_string(dir.path().join("out").join("manifest.txt")).unwrap();
    assert!(manifest.starts_with("config_hash="));
    assert!(manifest.contains("default.solver.courant=0.3\n"));
    assert!(manifest.contains("status=ok"));
}
