//! Verification harnesses: source-receiver reciprocity, closed-form
//! oracles (spherical spreading, plane-wave reflection at an interface and at
//! an absorbing end) and spectral convergence of a standing mode.
//!
//! Every harness returns a typed result plus a key-value report that embeds
//! the hash of the configuration it ran.

mod convergence;
mod oracle;
mod reciprocity;

use thiserror::Error;

pub use convergence::{convergence_study, ConvergenceParams, ConvergenceRow, ConvergenceStudy};
pub use oracle::{
    absorbing_reflection_test, greens_oracle_test, interface_rt_test, AbsorbingParams, AbsorbingReport, ColumnKind,
    GreensParams, GreensReport, InterfaceParams, InterfaceReport,
};
pub use reciprocity::{reciprocity_test, ReciprocityParams, ReciprocityResult};

use crate::assembly::{AssemblyError, Discretization};
use crate::excitation::{
    ExcitationError, InjectedSource, LocatedReceiver, PointSource, Seismogram, SourceKind, SourceTimeFunction,
};
use crate::material::MaterialError;
use crate::mesh::{voxels_to_hexmesh, BoundaryKind, BoundaryPolicy, HexMesh, MeshError, VoxelVolume};
use crate::numfmt::g17;
use crate::solver::{Manifest, SolverError, SolverRun, TimeGrid};

#[derive(Debug, Error)]
pub enum ValidationError {
    /// The requested setup cannot give a meaningful measurement.
    #[error("configuration error: {0}")]
    Config(String),
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

/// Measurement window [t_a − 3T, t_a + T_w + 3T] around an arrival at t_a of
/// a burst lasting T_w with period T, clipped at zero.
pub fn pulse_window(arrival: f64, duration: f64, period: f64) -> (f64, f64) {
    ((arrival - 3.0 * period).max(0.0), arrival + duration + 3.0 * period)
}

/// Sample of largest magnitude within [t0, t1], with its sign.
pub fn signed_peak(times: &[f64], trace: &[f64], window: (f64, f64)) -> f64 {
    times
        .iter()
        .zip(trace)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(_, v)| *v)
        .fold(0.0, |best: f64, v| if v.abs() > best.abs() { v } else { best })
}

/// Largest |v| over a trace.
pub fn max_abs(trace: &[f64]) -> f64 {
    trace.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

/// Runs to the end of `grid`, returning the traces and the largest absorbing
/// power seen (never positive for a correct discretization).
pub(crate) fn run_traces(
    disc: &Discretization,
    grid: TimeGrid,
    sources: Vec<InjectedSource>,
    receivers: Vec<LocatedReceiver>,
) -> Result<(Seismogram, f64), SolverError> {
    let mut run = SolverRun::new(disc, grid, sources, receivers);
    run.run_to_end()?;
    let flux = run.diagnostics.stacey_power.iter().fold(f64::NEG_INFINITY, |m, p| m.max(*p));
    Ok((run.seismogram, flux))
}

/// One-element-wide column along z of cubes of edge `h`, with `materials[k]`
/// in layer k, symmetry sides and absorbing ends.
pub(crate) fn column_mesh(materials: &[u32], h: f64) -> Result<HexMesh, MeshError> {
    let vol = VoxelVolume { dims: [1, 1, materials.len()], spacing: [h; 3], origin: [0.0; 3], materials: materials.to_vec() };
    let mut policy = BoundaryPolicy::all(BoundaryKind::Symmetry);
    policy.sides[4] = BoundaryKind::Absorbing;
    policy.sides[5] = BoundaryKind::Absorbing;
    voxels_to_hexmesh(&vol, &policy)
}

/// Points loading one cross-section z of a [`column_mesh`] uniformly: one
/// per GLL node, amplitude proportional to the product of the transverse
/// quadrature weights (summing to the burst amplitude). A uniform load
/// drives only the plane mode, since fields constant across the section
/// stay constant.
pub(crate) fn cross_section_points(
    disc: &Discretization,
    h: f64,
    z: f64,
    kind: SourceKind,
    stf: SourceTimeFunction,
) -> Vec<PointSource> {
    let rule = disc.rule();
    let (x, w) = (rule.nodes(), rule.weights());
    let mut pts = Vec::with_capacity(x.len() * x.len());
    for j in 0..x.len() {
        for i in 0..x.len() {
            pts.push(PointSource {
                name: format!("section[{i},{j}]"),
                position: [0.5 * h * (1.0 + x[i]), 0.5 * h * (1.0 + x[j]), z],
                kind,
                stf: stf.with_amplitude(stf.amplitude * 0.25 * w[i] * w[j]),
            });
        }
    }
    pts
}

/// Starts a report with the config hash.
pub(crate) fn report_header(kind: &str, config_hash: &str) -> Manifest {
    let mut m = Manifest::new();
    m.set("validation", kind);
    m.set("config_hash", config_hash);
    m
}

pub(crate) fn set_f(m: &mut Manifest, key: &str, v: f64) {
    m.set(key, g17(v));
}
