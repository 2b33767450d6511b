//! Source-receiver reciprocity: G(r₂, t | r₁) = G(r₁, t | r₂).

use super::{report_header, run_traces, set_f, ValidationError};
use crate::assembly::Discretization;
use crate::excitation::{
    locate_point, Channel, InjectedSource, LocatedReceiver, PointSource, ReceiverSpec, Seismogram, SourceKind,
    SourceTimeFunction,
};
use crate::material::DomainKind;
use crate::mesh::{HexMesh, Point3};
use crate::solver::{Manifest, TimeGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct ReciprocityParams {
    pub r1: Point3,
    pub r2: Point3,
    /// Force direction at r1 in solids; the swapped run uses its reverse and
    /// both record velocity along their own force direction.
    pub orientation: [f64; 3],
    pub stf: SourceTimeFunction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReciprocityResult {
    pub times: Vec<f64>,
    /// Source at r1, receiver at r2.
    pub trace_12: Vec<f64>,
    /// Source at r2, receiver at r1.
    pub trace_21: Vec<f64>,
    /// `pressure` or `velocity`.
    pub quantity: &'static str,
    pub max_abs_diff: f64,
    pub max_abs_signal: f64,
    /// 20·log10(max_abs_diff / max_abs_signal); `None` when both traces vanish.
    pub ratio_db: Option<f64>,
    /// Largest absorbing power over both runs.
    pub max_boundary_flux: f64,
}

impl ReciprocityResult {
    pub fn from_traces(times: Vec<f64>, trace_12: Vec<f64>, trace_21: Vec<f64>, quantity: &'static str) -> Self {
        assert_eq!(trace_12.len(), trace_21.len(), "traces must share one time grid");
        let max_abs_diff = trace_12.iter().zip(&trace_21).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let max_abs_signal = trace_12.iter().chain(&trace_21).fold(0.0f64, |m, v| m.max(v.abs()));
        let ratio_db = (max_abs_signal > 0.0).then(|| 20.0 * (max_abs_diff / max_abs_signal).log10());
        ReciprocityResult {
            times,
            trace_12,
            trace_21,
            quantity,
            max_abs_diff,
            max_abs_signal,
            ratio_db,
            max_boundary_flux: f64::NEG_INFINITY,
        }
    }

    /// True when the level is at or below `threshold_db`; a vanishing signal
    /// never passes.
    pub fn passes(&self, threshold_db: f64) -> bool {
        self.ratio_db.is_some_and(|r| r <= threshold_db)
    }

    pub fn report(&self, config_hash: &str, threshold_db: f64) -> Manifest {
        let mut m = report_header("reciprocity", config_hash);
        m.set("quantity", self.quantity);
        m.set("samples", self.times.len());
        set_f(&mut m, "max_abs_diff", self.max_abs_diff);
        set_f(&mut m, "max_abs_signal", self.max_abs_signal);
        match self.ratio_db {
            Some(r) => {
                set_f(&mut m, "ratio_db", r);
                m.set("zero_signal", "false");
            }
            None => {
                m.set("ratio_db", "undefined");
                m.set("zero_signal", "true");
            }
        }
        set_f(&mut m, "threshold_db", threshold_db);
        set_f(&mut m, "max_boundary_flux", self.max_boundary_flux);
        m.set("pass", self.passes(threshold_db));
        m
    }

    /// Both traces as CSV columns `trace_12` and `trace_21`.
    pub fn seismogram(&self) -> Seismogram {
        Seismogram {
            times: self.times.clone(),
            channels: vec![("trace_12".into(), self.trace_12.clone()), ("trace_21".into(), self.trace_21.clone())],
        }
    }
}

fn one_way(
    mesh: &HexMesh,
    disc: &Discretization,
    grid: TimeGrid,
    from: Point3,
    to: Point3,
    kind: SourceKind,
    stf: SourceTimeFunction,
) -> Result<(Seismogram, f64, Vec<f64>), ValidationError> {
    let src = PointSource { name: "src".into(), position: from, kind, stf };
    let source = InjectedSource::from_points("src", &[src], mesh, disc)?;
    let (channels, dir) = match kind {
        SourceKind::Pressure => (vec![Channel::Pressure], None),
        SourceKind::Force { direction } => (vec![Channel::Vx, Channel::Vy, Channel::Vz], Some(direction)),
    };
    let spec = ReceiverSpec { name: "rec".into(), position: to, channels };
    let rec = LocatedReceiver::locate(&spec, mesh, disc)?;
    let (seis, flux) = run_traces(disc, grid, vec![source], vec![rec])?;
    let trace = match dir {
        None => seis.channels[0].1.clone(),
        Some(d) => (0..seis.times.len()).map(|i| (0..3).map(|a| d[a] * seis.channels[a].1[i]).sum()).collect(),
    };
    Ok((seis, flux, trace))
}

/// Runs the two swapped simulations concurrently and compares the traces.
/// Both points must lie in the same domain kind; pressure pairs must also
/// share one density, since a monopole of given pressure amplitude injects
/// volume in inverse proportion to the local density.
pub fn reciprocity_test(
    mesh: &HexMesh,
    disc: &Discretization,
    grid: TimeGrid,
    params: &ReciprocityParams,
) -> Result<ReciprocityResult, ValidationError> {
    let locate = |p: Point3, which: &str| {
        locate_point(mesh, p).ok_or_else(|| ValidationError::Config(format!("{which} {p:?} lies outside the mesh")))
    };
    let (e1, _) = locate(params.r1, "r1")?;
    let (e2, _) = locate(params.r2, "r2")?;
    if params.r1 == params.r2 {
        return Err(ValidationError::Config("r1 and r2 coincide".into()));
    }
    let k1 = disc.dofmap().element_kind(e1);
    let k2 = disc.dofmap().element_kind(e2);
    if k1 != k2 {
        return Err(ValidationError::Config("r1 and r2 must lie in the same domain kind".into()));
    }
    let (kind_12, kind_21, quantity) = match k1 {
        DomainKind::Acoustic => {
            if disc.element_density(e1) != disc.element_density(e2) {
                return Err(ValidationError::Config("pressure reciprocity needs equal densities at r1 and r2".into()));
            }
            (SourceKind::Pressure, SourceKind::Pressure, "pressure")
        }
        DomainKind::Elastic => {
            let d = params.orientation;
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if (n - 1.0).abs() > 1e-9 {
                return Err(ValidationError::Config(format!("orientation must be a unit vector (norm {n})")));
            }
            (
                SourceKind::Force { direction: d },
                SourceKind::Force { direction: [-d[0], -d[1], -d[2]] },
                "velocity",
            )
        }
    };
    let (a, b) = rayon::join(
        || one_way(mesh, disc, grid, params.r1, params.r2, kind_12, params.stf),
        || one_way(mesh, disc, grid, params.r2, params.r1, kind_21, params.stf),
    );
    let (seis, flux_a, t12) = a?;
    let (_, flux_b, t21) = b?;
    let mut r = ReciprocityResult::from_traces(seis.times, t12, t21, quantity);
    r.max_boundary_flux = flux_a.max(flux_b);
    Ok(r)
}
