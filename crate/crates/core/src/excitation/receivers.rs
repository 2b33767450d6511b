//! Receivers: location, per-step sampling and CSV traces.

use std::io::{self, BufRead, Write};

use super::points::{interpolation_weights, locate_point, mismatch};
use super::ExcitationError;
use crate::assembly::{Discretization, FieldVectors};
use crate::material::DomainKind;
use crate::mesh::{det3, inv3, trilinear_jacobian, HexMesh, Point3};
use crate::numfmt::g17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Pressure,
    Vx,
    Vy,
    Vz,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Pressure, Channel::Vx, Channel::Vy, Channel::Vz];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Pressure => "pressure",
            Channel::Vx => "vx",
            Channel::Vy => "vy",
            Channel::Vz => "vz",
        }
    }

    pub fn parse(s: &str) -> Option<Channel> {
        Channel::ALL.into_iter().find(|c| c.name() == s)
    }

    fn axis(self) -> Option<usize> {
        match self {
            Channel::Pressure => None,
            Channel::Vx => Some(0),
            Channel::Vy => Some(1),
            Channel::Vz => Some(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverSpec {
    pub name: String,
    pub position: Point3,
    pub channels: Vec<Channel>,
}

/// Receiver with precomputed interpolation weights.
///
/// Fluid: p = −Σ wᵢ φ̈ᵢ and v = Σ gᵢ φ̇ᵢ with gᵢ = ρ⁻¹∇ℓᵢ. Solid: v = Σ wᵢ u̇ᵢ.
#[derive(Debug, Clone, PartialEq)]
pub struct LocatedReceiver {
    pub spec: ReceiverSpec,
    pub element: usize,
    pub xi: [f64; 3],
    pub kind: DomainKind,
    fluid: Vec<(u32, f64, [f64; 3])>,
    solid: Vec<(u32, f64)>,
}

impl LocatedReceiver {
    pub fn locate(spec: &ReceiverSpec, mesh: &HexMesh, disc: &Discretization) -> Result<Self, ExcitationError> {
        let (e, xi) = locate_point(mesh, spec.position).ok_or_else(|| ExcitationError::Placement {
            what: "receiver",
            name: spec.name.clone(),
            position: spec.position,
        })?;
        let dm = disc.dofmap();
        let kind = dm.element_kind(e);
        if kind == DomainKind::Elastic && spec.channels.contains(&Channel::Pressure) {
            return Err(mismatch("pressure receiver", &spec.name, e, kind, "acoustic"));
        }
        let rule = disc.rule();
        let w = interpolation_weights(rule, xi);
        let nodes = dm.element_nodes(e);
        let mut fluid = Vec::new();
        let mut solid = Vec::new();
        match kind {
            DomainKind::Acoustic => {
                let j = trilinear_jacobian(&mesh.corner_coords(e), xi);
                let jinv = inv3(&j, det3(&j));
                let rho = disc.element_density(e);
                let b: Vec<Vec<f64>> = xi.iter().map(|&x| rule.basis_values(x).expect("clamped")).collect();
                let d: Vec<Vec<f64>> = xi.iter().map(|&x| rule.basis_derivs(x).expect("clamped")).collect();
                let n = rule.len();
                for k in 0..n {
                    for jj in 0..n {
                        for i in 0..n {
                            let l = i + n * (jj + n * k);
                            let dref = [d[0][i] * b[1][jj] * b[2][k], b[0][i] * d[1][jj] * b[2][k], b[0][i] * b[1][jj] * d[2][k]];
                            let mut g = [0.0; 3];
                            for (a, ga) in g.iter_mut().enumerate() {
                                *ga = (0..3).map(|r| dref[r] * jinv[r][a]).sum::<f64>() / rho;
                            }
                            let dof = dm.fluid_dof(nodes[l] as usize).expect("fluid node") as u32;
                            fluid.push((dof, w[l], g));
                        }
                    }
                }
            }
            DomainKind::Elastic => {
                for (l, &wl) in w.iter().enumerate() {
                    if wl != 0.0 {
                        solid.push((dm.solid_node(nodes[l] as usize).expect("solid node") as u32, wl));
                    }
                }
            }
        }
        Ok(LocatedReceiver { spec: spec.clone(), element: e, xi, kind, fluid, solid })
    }

    pub fn sample_channel(&self, channel: Channel, state: &FieldVectors) -> f64 {
        match (channel.axis(), self.kind) {
            // 0 − Σ rather than −Σ: a silent receiver records +0, not −0.
            (None, _) => 0.0 - self.fluid.iter().map(|&(f, w, _)| w * state.phi_ddot[f as usize]).sum::<f64>(),
            (Some(a), DomainKind::Acoustic) => {
                self.fluid.iter().map(|&(f, _, g)| g[a] * state.phi_dot[f as usize]).sum()
            }
            (Some(a), DomainKind::Elastic) => {
                self.solid.iter().map(|&(s, w)| w * state.u_dot[3 * s as usize + a]).sum()
            }
        }
    }

    /// Appends one sample per channel, in channel order.
    pub fn sample(&self, state: &FieldVectors, out: &mut Vec<f64>) {
        for &c in &self.spec.channels {
            out.push(self.sample_channel(c, state));
        }
    }
}

/// Receiver traces sampled at common times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Seismogram {
    pub times: Vec<f64>,
    /// Column name (`<receiver>_<channel>`) and samples.
    pub channels: Vec<(String, Vec<f64>)>,
}

impl Seismogram {
    pub fn for_receivers(receivers: &[LocatedReceiver]) -> Self {
        let channels = receivers
            .iter()
            .flat_map(|r| r.spec.channels.iter().map(move |c| (format!("{}_{}", r.spec.name, c.name()), Vec::new())))
            .collect();
        Seismogram { times: Vec::new(), channels }
    }

    /// Records one time sample from every receiver.
    pub fn record(&mut self, t: f64, receivers: &[LocatedReceiver], state: &FieldVectors) {
        self.times.push(t);
        let mut row = Vec::with_capacity(self.channels.len());
        for r in receivers {
            r.sample(state, &mut row);
        }
        for (col, v) in self.channels.iter_mut().zip(row) {
            col.1.push(v);
        }
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "t_seconds")?;
        for (n, _) in &self.channels {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for (i, t) in self.times.iter().enumerate() {
            write!(w, "{}", g17(*t))?;
            for (_, v) in &self.channels {
                write!(w, ",{}", g17(v[i]))?;
            }
            writeln!(w)?;
        }
        w.flush()
    }
}

/// Parses a trace file written by [`Seismogram::write_csv`].
pub fn read_csv<R: BufRead>(r: R) -> io::Result<Seismogram> {
    let bad = |line: usize, msg: String| io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {msg}"));
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| bad(1, "empty file".into()))??;
    let mut cols = header.trim().split(',');
    if cols.next() != Some("t_seconds") {
        return Err(bad(1, "first column must be t_seconds".into()));
    }
    let mut s = Seismogram { times: Vec::new(), channels: cols.map(|c| (c.to_string(), Vec::new())).collect() };
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .trim()
            .split(',')
            .map(|v| v.parse::<f64>().map_err(|e| bad(i + 2, format!("'{v}': {e}"))))
            .collect::<Result<_, _>>()?;
        if vals.len() != s.channels.len() + 1 {
            return Err(bad(i + 2, format!("expected {} fields, found {}", s.channels.len() + 1, vals.len())));
        }
        s.times.push(vals[0]);
        for (col, v) in s.channels.iter_mut().zip(&vals[1..]) {
            col.1.push(*v);
        }
    }
    Ok(s)
}
