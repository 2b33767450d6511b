//! Point location, point sources and tapered plane-wave arrays.

use std::collections::BTreeMap;

use super::{ExcitationError, SourceTimeFunction};
use crate::assembly::Discretization;
use crate::gll::GllRule;
use crate::material::{DomainKind, MaterialTable};
use crate::mesh::{invert_trilinear, trilinear_point, HexMesh, Point3};

/// A point belongs to an element if its clamped reference image lies within
/// this distance (metres).
pub const LOCATE_TOLERANCE: f64 = 1e-9;

/// Finds the lowest-id element containing `p` and its reference
/// coordinates, clamped to [-1, 1]³.
pub fn locate_point(mesh: &HexMesh, p: Point3) -> Option<(usize, [f64; 3])> {
    for e in 0..mesh.n_elements() {
        let corners = mesh.corner_coords(e);
        let outside = (0..3).any(|a| {
            let lo = corners.iter().map(|c| c[a]).fold(f64::INFINITY, f64::min);
            let hi = corners.iter().map(|c| c[a]).fold(f64::NEG_INFINITY, f64::max);
            p[a] < lo - LOCATE_TOLERANCE || p[a] > hi + LOCATE_TOLERANCE
        });
        if outside {
            continue;
        }
        let Some(xi) = invert_trilinear(&corners, p, 1e-12) else { continue };
        let clamped = xi.map(|v| v.clamp(-1.0, 1.0));
        let q = trilinear_point(&corners, clamped);
        let dist = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) + (q[2] - p[2]).powi(2)).sqrt();
        if dist <= LOCATE_TOLERANCE {
            return Some((e, clamped));
        }
    }
    None
}

/// Tensor-product interpolation weights ℓ_i(ξ)ℓ_j(η)ℓ_k(ζ) in local order.
pub(crate) fn interpolation_weights(rule: &GllRule, xi: [f64; 3]) -> Vec<f64> {
    let b: Vec<Vec<f64>> = xi.iter().map(|&x| rule.basis_values(x).expect("clamped coordinate")).collect();
    let n = rule.len();
    let mut w = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                w.push(b[0][i] * b[1][j] * b[2][k]);
            }
        }
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceKind {
    /// Monopole in the fluid, calibrated so that p(r, t) = A s(t − r/c)/(4πr)
    /// in a homogeneous medium.
    Pressure,
    /// Point force A s(t) along a unit direction, in a solid.
    Force { direction: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSource {
    pub name: String,
    pub position: Point3,
    pub kind: SourceKind,
    pub stf: SourceTimeFunction,
}

/// Time dependence shared by all points of an injected source.
#[derive(Debug, Clone, Copy, PartialEq)]
enum SourceTime {
    /// s(t): forces.
    Direct(SourceTimeFunction),
    /// −S₂(t): pressure monopoles (the 1/ρ factor sits in the weights).
    NegSecondIntegral(SourceTimeFunction),
}

/// A source (or a set of simultaneous point sources) reduced to fixed DOF
/// weights and one time function.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectedSource {
    pub name: String,
    pub fluid: Vec<(u32, f64)>,
    pub solid: Vec<(u32, [f64; 3])>,
    time: SourceTime,
}

impl InjectedSource {
    /// Merges points sharing one time function (amplitudes may differ).
    pub fn from_points(
        name: &str,
        points: &[PointSource],
        mesh: &HexMesh,
        disc: &Discretization,
    ) -> Result<Self, ExcitationError> {
        let first = points.first().ok_or_else(|| ExcitationError::PlaneWave("no source points".into()))?;
        let unit = first.stf.with_amplitude(1.0);
        let mut fluid: BTreeMap<u32, f64> = BTreeMap::new();
        let mut solid: BTreeMap<u32, [f64; 3]> = BTreeMap::new();
        let dm = disc.dofmap();
        for p in points {
            if p.stf.with_amplitude(1.0) != unit || std::mem::discriminant(&p.kind) != std::mem::discriminant(&first.kind)
            {
                return Err(ExcitationError::InvalidStf(format!("points of source '{name}' must share one burst")));
            }
            let (e, xi) = locate_point(mesh, p.position).ok_or_else(|| ExcitationError::Placement {
                what: "source",
                name: p.name.clone(),
                position: p.position,
            })?;
            let kind = dm.element_kind(e);
            let weights = interpolation_weights(disc.rule(), xi);
            let nodes = dm.element_nodes(e);
            match p.kind {
                SourceKind::Pressure => {
                    if kind != DomainKind::Acoustic {
                        return Err(mismatch("source", &p.name, e, kind, "acoustic"));
                    }
                    let scale = p.stf.amplitude / disc.element_density(e);
                    for (l, &w) in weights.iter().enumerate() {
                        if w != 0.0 {
                            let f = dm.fluid_dof(nodes[l] as usize).expect("fluid node") as u32;
                            *fluid.entry(f).or_insert(0.0) += w * scale;
                        }
                    }
                }
                SourceKind::Force { direction } => {
                    if kind != DomainKind::Elastic {
                        return Err(mismatch("source", &p.name, e, kind, "elastic"));
                    }
                    for (l, &w) in weights.iter().enumerate() {
                        if w != 0.0 {
                            let s = dm.solid_node(nodes[l] as usize).expect("solid node") as u32;
                            let entry = solid.entry(s).or_insert([0.0; 3]);
                            for a in 0..3 {
                                entry[a] += w * p.stf.amplitude * direction[a];
                            }
                        }
                    }
                }
            }
        }
        let time = match first.kind {
            SourceKind::Pressure => SourceTime::NegSecondIntegral(unit),
            SourceKind::Force { .. } => SourceTime::Direct(unit),
        };
        Ok(InjectedSource {
            name: name.to_string(),
            fluid: fluid.into_iter().collect(),
            solid: solid.into_iter().collect(),
            time,
        })
    }

    pub fn time_value(&self, t: f64) -> f64 {
        match self.time {
            SourceTime::Direct(s) => s.value(t),
            SourceTime::NegSecondIntegral(s) => -s.second_integral(t),
        }
    }

    /// Time function sampled at t_n = n·dt, n = 0..=n_steps.
    pub fn time_series(&self, dt: f64, n_steps: usize) -> Vec<f64> {
        (0..=n_steps).map(|n| self.time_value(n as f64 * dt)).collect()
    }

    /// Adds value × weights to the right-hand sides.
    pub fn add_to(&self, value: f64, fluid: &mut [f64], solid: &mut [f64]) {
        if value == 0.0 {
            return;
        }
        for &(f, w) in &self.fluid {
            fluid[f as usize] += w * value;
        }
        for (s, w) in &self.solid {
            let s = 3 * *s as usize;
            for a in 0..3 {
                solid[s + a] += w[a] * value;
            }
        }
    }

    /// Description of the amplitude normalization for run manifests.
    pub fn calibration(&self) -> &'static str {
        match self.time {
            SourceTime::Direct(_) => "force: f(t) = A s(t) d interpolated onto solid nodes",
            SourceTime::NegSecondIntegral(_) => {
                "pressure: fluid load -(A/rho) S2(t), S2 = second time integral of s; p(r,t) = A s(t - r/c)/(4 pi r)"
            }
        }
    }
}

pub(crate) fn mismatch(
    what: &'static str,
    name: &str,
    element: usize,
    found: DomainKind,
    expected: &'static str,
) -> ExcitationError {
    ExcitationError::DomainMismatch {
        what,
        name: name.to_string(),
        element,
        found: if found == DomainKind::Acoustic { "acoustic" } else { "elastic" },
        expected,
    }
}

/// Array of simultaneous pressure monopoles on an axis-normal plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveSpec {
    pub name: String,
    /// Normal axis of the plane (0, 1, 2).
    pub axis: usize,
    /// Plane coordinate along `axis`.
    pub position: f64,
    /// Nominal propagation sense along `axis` (+1 or -1).
    pub direction: f64,
    /// Array centre in the two transverse coordinates (ascending axis order).
    pub center: [f64; 2],
    /// Square half-width of the array.
    pub half_width: f64,
    pub spacing: f64,
    /// Radius of the unit-amplitude region.
    pub r_flat: f64,
    /// Gaussian decay length beyond `r_flat`.
    pub sigma: f64,
    pub stf: SourceTimeFunction,
}

/// 1 for d ≤ r_flat, exp(−((d − r_flat)/σ)²) beyond.
pub fn plane_wave_amplitude(d: f64, r_flat: f64, sigma: f64) -> f64 {
    if d <= r_flat {
        1.0
    } else {
        (-((d - r_flat) / sigma).powi(2)).exp()
    }
}

/// Expands a plane-wave specification into point sources. The spacing must
/// not exceed a quarter of the water wavelength at f0 (the slowest acoustic
/// material if the table has no `water`).
pub fn build_plane_wave_array(
    spec: &PlaneWaveSpec,
    mesh: &HexMesh,
    table: &MaterialTable,
) -> Result<Vec<PointSource>, ExcitationError> {
    if spec.axis > 2 || spec.direction.abs() != 1.0 {
        return Err(ExcitationError::PlaneWave("axis must be x, y or z with direction +1 or -1".into()));
    }
    if !(spec.spacing > 0.0) || !(spec.half_width > 0.0) || !(spec.sigma > 0.0) || spec.r_flat < 0.0 {
        return Err(ExcitationError::PlaneWave("spacing, half_width and sigma must be positive".into()));
    }
    let c = match table.by_name("water") {
        Some((_, w)) => w.vp,
        None => table
            .iter()
            .filter(|(_, p)| p.domain_kind() == DomainKind::Acoustic)
            .map(|(_, p)| p.vp)
            .fold(f64::INFINITY, f64::min),
    };
    let max = c / spec.stf.f0 / 4.0;
    if spec.spacing > max * (1.0 + 1e-12) {
        return Err(ExcitationError::SpacingTooLarge { spacing: spec.spacing, max });
    }
    let (ta, tb) = match spec.axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let m = (spec.half_width / spec.spacing + 1e-9).floor() as i64;
    let mut out = Vec::new();
    for kb in -m..=m {
        for ka in -m..=m {
            let (da, db) = (ka as f64 * spec.spacing, kb as f64 * spec.spacing);
            let mut p = [0.0; 3];
            p[spec.axis] = spec.position;
            p[ta] = spec.center[0] + da;
            p[tb] = spec.center[1] + db;
            let name = format!("{}[{},{}]", spec.name, ka, kb);
            let (e, _) = locate_point(mesh, p).ok_or_else(|| ExcitationError::Placement {
                what: "plane-wave point",
                name: name.clone(),
                position: p,
            })?;
            let props = table.get(mesh.elements()[e].material).map_err(|err| ExcitationError::PlaneWave(err.to_string()))?;
            if props.domain_kind() != DomainKind::Acoustic {
                return Err(mismatch("plane-wave point", &name, e, props.domain_kind(), "acoustic"));
            }
            let a = plane_wave_amplitude((da * da + db * db).sqrt(), spec.r_flat, spec.sigma);
            out.push(PointSource {
                name,
                position: p,
                kind: SourceKind::Pressure,
                stf: spec.stf.with_amplitude(spec.stf.amplitude * a),
            });
        }
    }
    Ok(out)
}
