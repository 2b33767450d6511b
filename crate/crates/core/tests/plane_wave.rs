//! The tapered monopole sheet launches a plane front across its flat region.

use specwave_core::assembly::Discretization;
use specwave_core::config::{DEFAULT_R_FLAT_FRACTION, DEFAULT_SIGMA_FRACTION};
use specwave_core::excitation::{
    plane_wave_amplitude, Channel, InjectedSource, LocatedReceiver, PointSource, ReceiverSpec, SourceKind,
    SourceTimeFunction,
};
use specwave_core::material::{builtin_dolphin_table, WATER_ID};
use specwave_core::mesh::{voxels_to_hexmesh, BoundaryKind, BoundaryPolicy, VoxelVolume};
use specwave_core::solver::{run_simulation, RunOptions, TimeGrid};

/// Quarter of a sheet centred on the z axis: the rigid planes x = 0 and
/// y = 0 mirror it into the full array, so points on them carry half
/// weight (a quarter at the corner).
#[test]
fn receivers_in_the_flat_region_see_the_same_wave() {
    let table = builtin_dolphin_table();
    let h = 1e-3;
    let (n, nz) = (48, 8);
    let vol = VoxelVolume::uniform([n, n, nz], [h; 3], WATER_ID);
    let mut policy = BoundaryPolicy::all(BoundaryKind::Absorbing);
    policy.sides[0] = BoundaryKind::Free;
    policy.sides[2] = BoundaryKind::Free;
    let mesh = voxels_to_hexmesh(&vol, &policy).unwrap();
    let disc = Discretization::build(&mesh, &table, 3).unwrap();

    // 400 kHz: the half-width is about twelve wavelengths.
    let stf = SourceTimeFunction::tone_burst(400e3, 4.0, 0.5).unwrap();
    let (half_width, spacing, plane) = (44e-3, 0.9e-3, 2e-3);
    let (r_flat, sigma) = (DEFAULT_R_FLAT_FRACTION * half_width, DEFAULT_SIGMA_FRACTION * half_width);
    let m = (half_width / spacing + 1e-9).floor() as usize;
    let mut points = Vec::new();
    for j in 0..=m {
        for i in 0..=m {
            let (x, y) = (i as f64 * spacing, j as f64 * spacing);
            let mirror = if i == 0 { 0.5 } else { 1.0 } * if j == 0 { 0.5 } else { 1.0 };
            let a = mirror * plane_wave_amplitude(x.hypot(y), r_flat, sigma);
            points.push(PointSource {
                name: format!("pw[{i},{j}]"),
                position: [x, y, plane],
                kind: SourceKind::Pressure,
                stf: stf.with_amplitude(a),
            });
        }
    }
    let source = InjectedSource::from_points("pw", &points, &mesh, &disc).unwrap();
    let z = plane + 3e-3;
    let specs = [("axis", [0.0, 0.0, z]), ("offset", [2.1e-3, 1.3e-3, z])];
    let receivers = specs
        .iter()
        .map(|(name, p)| {
            let spec = ReceiverSpec { name: name.to_string(), position: *p, channels: vec![Channel::Pressure] };
            LocatedReceiver::locate(&spec, &mesh, &disc).unwrap()
        })
        .collect();
    let t_end = (z - plane) / 1480.0 + stf.window_length + 2e-6;
    let grid = TimeGrid::from_mesh(&mesh, &table, disc.rule(), 0.3, t_end).unwrap();
    let out = run_simulation(&disc, grid, vec![source], receivers, &RunOptions::default()).unwrap();
    let a = out.seismogram.channel("axis_pressure").unwrap();
    let b = out.seismogram.channel("offset_pressure").unwrap();
    let rms = |v: &mut dyn Iterator<Item = f64>| {
        let (s, k) = v.fold((0.0, 0usize), |(s, k), x| (s + x * x, k + 1));
        (s / k as f64).sqrt()
    };
    let diff = rms(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let level = rms(&mut a.iter().copied());
    assert!(level > 0.0);
    assert!(diff <= 0.01 * level, "relative RMS difference {}", diff / level);
}
