//! Global DOF mapping and matrix-free evaluation of the coupled system:
//! diagonal masses, acoustic and elastic stiffness, fluid-solid coupling,
//! Stacey absorbing terms and symmetry (roller) constraints.
//!
//! Acoustic convention: displacement u = ρ⁻¹∇φ and pressure p = −φ̈.
//! Fluid mass weight 1/(ρ vp²), fluid stiffness weight 1/ρ. The semi-discrete
//! system is
//!
//! ```text
//! M_a φ̈ = −K_a φ + C u − B_a φ̇ + f_a
//! M_e ü = −K_e u − Cᵀ φ̈ − B_e u̇ + f_e
//! ```
//!
//! with C the interface integral of ℓ_i n (n pointing from fluid to solid).
//!
//! Element contributions are summed per global DOF in ascending element
//! order, so results are bitwise independent of the worker count.

mod boundary;
mod dofmap;
mod kernels;

use std::sync::Mutex;

use rayon::prelude::*;
use thiserror::Error;

pub use boundary::{CouplingNode, SymmetryNode};
pub use dofmap::{DofMap, MERGE_TOLERANCE};
use kernels::{with_np, AffineAcoustic, AffineElastic, GeneralAcoustic, GeneralElastic};

use crate::gll::{derivative_matrix, gll_rule, GllError, GllRule, LagrangeTable};
use crate::material::{DomainKind, MaterialError, MaterialTable};
use crate::mesh::{element_geometry, quality_report, HexMesh, MeshError};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Gll(#[from] GllError),
    #[error("non-conformal mesh: face {face} of element {element} touches element {other} without sharing its nodes")]
    NonConformal { element: usize, face: usize, other: usize },
    #[error("coupling face {face} of element {element}: fluid and solid normals disagree")]
    CouplingNormal { element: usize, face: usize },
    #[error("face set '{name}': element {element} face {face}: {reason}")]
    FaceSet { name: String, element: usize, face: usize, reason: String },
    #[error("{domain} mass at DOF {dof} is not positive ({value})")]
    MassNotPositive { domain: &'static str, dof: usize, value: f64 },
}

/// Lumped masses: one entry per fluid DOF and one per solid node (shared by
/// its three components).
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalMass {
    pub fluid: Vec<f64>,
    pub solid: Vec<f64>,
}

impl DiagonalMass {
    /// Total solid mass carried by one displacement component.
    pub fn solid_component_total(&self) -> f64 {
        self.solid.iter().sum()
    }

    pub fn fluid_total(&self) -> f64 {
        self.fluid.iter().sum()
    }
}

/// Global fields: φ and its time derivatives on fluid DOFs, displacement and
/// derivatives on solid nodes (interleaved x, y, z).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVectors {
    pub phi: Vec<f64>,
    pub phi_dot: Vec<f64>,
    pub phi_ddot: Vec<f64>,
    pub u: Vec<f64>,
    pub u_dot: Vec<f64>,
    pub u_ddot: Vec<f64>,
}

impl FieldVectors {
    pub fn zeros(n_fluid: usize, n_solid_nodes: usize) -> Self {
        let f = vec![0.0; n_fluid];
        let s = vec![0.0; 3 * n_solid_nodes];
        FieldVectors {
            phi: f.clone(),
            phi_dot: f.clone(),
            phi_ddot: f,
            u: s.clone(),
            u_dot: s.clone(),
            u_ddot: s,
        }
    }

    /// Largest absolute value over all arrays, with the location of the first
    /// non-finite entry if any.
    pub fn max_abs(&self) -> (f64, Option<(&'static str, usize)>) {
        let mut m: f64 = 0.0;
        let arrays: [(&'static str, &Vec<f64>); 6] = [
            ("phi", &self.phi),
            ("phi_dot", &self.phi_dot),
            ("phi_ddot", &self.phi_ddot),
            ("u", &self.u),
            ("u_dot", &self.u_dot),
            ("u_ddot", &self.u_ddot),
        ];
        for (name, a) in arrays {
            for (i, v) in a.iter().enumerate() {
                if !v.is_finite() {
                    return (f64::INFINITY, Some((name, i)));
                }
                m = m.max(v.abs());
            }
        }
        (m, None)
    }
}

enum Metric {
    /// Acoustic: packed G / w (6 values). Elastic: J⁻¹ (9) and det J.
    Affine([f64; 10]),
    /// Offset into the block's per-point metric storage.
    General(usize),
}

/// The elements of one domain kind with their gather indices and metrics.
struct ElementBlock {
    elements: Vec<usize>,
    /// Per block element, n³ fluid DOFs or solid nodes.
    dofs: Vec<u32>,
    metrics: Vec<Metric>,
    general: Vec<f64>,
    lame: Vec<(f64, f64)>,
    /// Incident (block element · n³ + local) slots per DOF, ascending.
    inc_offsets: Vec<u32>,
    inc_slots: Vec<u32>,
    buffer: Mutex<Vec<f64>>,
}

impl ElementBlock {
    fn new() -> Self {
        ElementBlock {
            elements: Vec::new(),
            dofs: Vec::new(),
            metrics: Vec::new(),
            general: Vec::new(),
            lame: Vec::new(),
            inc_offsets: Vec::new(),
            inc_slots: Vec::new(),
            buffer: Mutex::new(Vec::new()),
        }
    }

    fn build_incidence(&mut self, n_dofs: usize) {
        let mut counts = vec![0u32; n_dofs + 1];
        for &d in &self.dofs {
            counts[d as usize + 1] += 1;
        }
        for i in 0..n_dofs {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut slots = vec![0u32; self.dofs.len()];
        for (slot, &d) in self.dofs.iter().enumerate() {
            slots[fill[d as usize] as usize] = slot as u32;
            fill[d as usize] += 1;
        }
        self.inc_offsets = counts;
        self.inc_slots = slots;
    }
}

/// Spectral-element discretization of a mesh: everything the time loop
/// needs, read-only after construction.
pub struct Discretization {
    rule: GllRule,
    deriv: LagrangeTable,
    w3: Vec<f64>,
    dofmap: DofMap,
    mass: DiagonalMass,
    elem_rho: Vec<f64>,
    acoustic: ElementBlock,
    elastic: ElementBlock,
    coupling: Vec<CouplingNode>,
    stacey_fluid: Vec<(u32, f64)>,
    stacey_solid: Vec<(u32, [f64; 6])>,
    symmetry: Vec<SymmetryNode>,
}

impl Discretization {
    pub fn build(mesh: &HexMesh, table: &MaterialTable, degree: usize) -> Result<Self, AssemblyError> {
        let rule = gll_rule(degree)?;
        let deriv = derivative_matrix(&rule);
        quality_report(mesh)?;
        let dofmap = DofMap::build(mesh, table, &rule)?;
        let n = rule.len();
        let n3 = n * n * n;
        let w = rule.weights();
        let mut w3 = Vec::with_capacity(n3);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    w3.push(w[i] * w[j] * w[k]);
                }
            }
        }

        let mut mass = DiagonalMass { fluid: vec![0.0; dofmap.n_fluid()], solid: vec![0.0; dofmap.n_solid()] };
        let mut acoustic = ElementBlock::new();
        let mut elastic = ElementBlock::new();
        let mut elem_rho = Vec::with_capacity(mesh.n_elements());
        let mut faces = boundary::FaceAccumulator::default();
        for e in 0..mesh.n_elements() {
            let props = table.get(mesh.elements()[e].material)?;
            elem_rho.push(props.rho);
            let geo = element_geometry(mesh, e, &rule)?;
            let nodes = dofmap.element_nodes(e);
            let affine = is_affine(&geo.jacobian);
            match dofmap.element_kind(e) {
                DomainKind::Acoustic => {
                    let inv_rho = 1.0 / props.rho;
                    let mfac = inv_rho / (props.vp * props.vp);
                    for l in 0..n3 {
                        let f = dofmap.fluid_dof(nodes[l] as usize).expect("acoustic node has a fluid DOF");
                        mass.fluid[f] += w3[l] * geo.det[l] * mfac;
                        acoustic.dofs.push(f as u32);
                    }
                    let g = |l: usize| {
                        let ji = &geo.inverse[l];
                        let s = geo.det[l] * inv_rho;
                        let dot = |r: usize, t: usize| (0..3).map(|a| ji[r][a] * ji[t][a]).sum::<f64>() * s;
                        [dot(0, 0), dot(1, 1), dot(2, 2), dot(0, 1), dot(0, 2), dot(1, 2)]
                    };
                    if affine {
                        let c = g(0);
                        let mut m = [0.0; 10];
                        m[..6].copy_from_slice(&c);
                        acoustic.metrics.push(Metric::Affine(m));
                    } else {
                        acoustic.metrics.push(Metric::General(acoustic.general.len()));
                        for l in 0..n3 {
                            acoustic.general.extend(g(l).map(|v| v * w3[l]));
                        }
                    }
                    acoustic.elements.push(e);
                }
                DomainKind::Elastic => {
                    let lame = props.lame()?;
                    for l in 0..n3 {
                        let s = dofmap.solid_node(nodes[l] as usize).expect("elastic node has a solid index");
                        mass.solid[s] += w3[l] * geo.det[l] * props.rho;
                        elastic.dofs.push(s as u32);
                    }
                    if affine {
                        let ji = geo.inverse[0];
                        let mut m = [0.0; 10];
                        for r in 0..3 {
                            m[3 * r..3 * r + 3].copy_from_slice(&ji[r]);
                        }
                        m[9] = geo.det[0];
                        elastic.metrics.push(Metric::Affine(m));
                    } else {
                        elastic.metrics.push(Metric::General(elastic.general.len()));
                        for l in 0..n3 {
                            for r in 0..3 {
                                elastic.general.extend_from_slice(&geo.inverse[l][r]);
                            }
                            elastic.general.push(w3[l] * geo.det[l]);
                        }
                    }
                    elastic.lame.push(lame);
                    elastic.elements.push(e);
                }
            }
            faces.add_element(mesh, table, &dofmap, &rule, e, &geo)?;
        }
        for (dof, &m) in mass.fluid.iter().enumerate() {
            if !(m > 0.0) {
                return Err(AssemblyError::MassNotPositive { domain: "fluid", dof, value: m });
            }
        }
        for (dof, &m) in mass.solid.iter().enumerate() {
            if !(m > 0.0) {
                return Err(AssemblyError::MassNotPositive { domain: "solid", dof, value: m });
            }
        }
        acoustic.build_incidence(dofmap.n_fluid());
        elastic.build_incidence(dofmap.n_solid());
        let (coupling, stacey_fluid, stacey_solid, symmetry) = faces.finish();
        Ok(Discretization {
            rule,
            deriv,
            w3,
            dofmap,
            mass,
            elem_rho,
            acoustic,
            elastic,
            coupling,
            stacey_fluid,
            stacey_solid,
            symmetry,
        })
    }

    pub fn rule(&self) -> &GllRule {
        &self.rule
    }

    pub fn dofmap(&self) -> &DofMap {
        &self.dofmap
    }

    pub fn mass(&self) -> &DiagonalMass {
        &self.mass
    }

    pub fn element_density(&self, e: usize) -> f64 {
        self.elem_rho[e]
    }

    pub fn coupling_nodes(&self) -> &[CouplingNode] {
        &self.coupling
    }

    pub fn symmetry_nodes(&self) -> &[SymmetryNode] {
        &self.symmetry
    }

    pub fn n_absorbing_fluid(&self) -> usize {
        self.stacey_fluid.len()
    }

    pub fn n_absorbing_solid(&self) -> usize {
        self.stacey_solid.len()
    }

    /// Absorbing coefficients per fluid DOF.
    pub fn stacey_fluid(&self) -> &[(u32, f64)] {
        &self.stacey_fluid
    }

    /// Absorbing 3×3 blocks per solid node, packed [xx, yy, zz, xy, xz, yz].
    pub fn stacey_solid(&self) -> &[(u32, [f64; 6])] {
        &self.stacey_solid
    }

    /// Fraction of elements using the constant-metric kernel.
    pub fn affine_fraction(&self) -> f64 {
        let all = self.acoustic.metrics.iter().chain(&self.elastic.metrics);
        let total = self.acoustic.metrics.len() + self.elastic.metrics.len();
        all.filter(|m| matches!(m, Metric::Affine(_))).count() as f64 / total.max(1) as f64
    }

    pub fn zero_fields(&self) -> FieldVectors {
        FieldVectors::zeros(self.dofmap.n_fluid(), self.dofmap.n_solid())
    }

    fn d_array<const NP: usize>(&self) -> [[f64; NP]; NP] {
        let mut d = [[0.0; NP]; NP];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.deriv.get(i, j);
            }
        }
        d
    }

    /// out = K_a φ.
    pub fn apply_acoustic_stiffness(&self, phi: &[f64], out: &mut [f64]) {
        assert_eq!(phi.len(), self.dofmap.n_fluid());
        assert_eq!(out.len(), self.dofmap.n_fluid());
        with_np!(self.rule.len(), NP => self.acoustic_np::<NP>(phi, out))
    }

    /// out = K_e u (interleaved components).
    pub fn apply_elastic_stiffness(&self, u: &[f64], out: &mut [f64]) {
        assert_eq!(u.len(), 3 * self.dofmap.n_solid());
        assert_eq!(out.len(), 3 * self.dofmap.n_solid());
        with_np!(self.rule.len(), NP => self.elastic_np::<NP>(u, out))
    }

    fn acoustic_local<const NP: usize>(
        &self,
        d: &[[f64; NP]; NP],
        be: usize,
        loc: &[f64],
        res: &mut [f64],
        scratch: &mut [f64],
    ) {
        let n3 = NP * NP * NP;
        match &self.acoustic.metrics[be] {
            Metric::Affine(m) => {
                let c = [m[0], m[1], m[2], m[3], m[4], m[5]];
                kernels::acoustic_kernel::<NP, _>(d, &AffineAcoustic { c, w3: &self.w3 }, loc, res, scratch)
            }
            Metric::General(off) => {
                let g = &self.acoustic.general[*off..*off + 6 * n3];
                kernels::acoustic_kernel::<NP, _>(d, &GeneralAcoustic { g }, loc, res, scratch)
            }
        }
    }

    fn elastic_local<const NP: usize>(
        &self,
        d: &[[f64; NP]; NP],
        be: usize,
        loc: &[f64],
        res: &mut [f64],
        scratch: &mut [f64],
    ) {
        let n3 = NP * NP * NP;
        let (lambda, mu) = self.elastic.lame[be];
        match &self.elastic.metrics[be] {
            Metric::Affine(m) => {
                let jinv = [[m[0], m[1], m[2]], [m[3], m[4], m[5]], [m[6], m[7], m[8]]];
                let metric = AffineElastic { jinv, det: m[9], w3: &self.w3 };
                kernels::elastic_kernel::<NP, _>(d, &metric, lambda, mu, loc, res, scratch)
            }
            Metric::General(off) => {
                let g = &self.elastic.general[*off..*off + 10 * n3];
                kernels::elastic_kernel::<NP, _>(d, &GeneralElastic { g }, lambda, mu, loc, res, scratch)
            }
        }
    }

    fn acoustic_np<const NP: usize>(&self, phi: &[f64], out: &mut [f64]) {
        let n3 = NP * NP * NP;
        let d = self.d_array::<NP>();
        let b = &self.acoustic;
        if rayon::current_num_threads() <= 1 {
            out.fill(0.0);
            let mut loc = vec![0.0; n3];
            let mut res = vec![0.0; n3];
            let mut scratch = vec![0.0; 3 * n3];
            for be in 0..b.metrics.len() {
                let dofs = &b.dofs[be * n3..(be + 1) * n3];
                for (l, &g) in dofs.iter().enumerate() {
                    loc[l] = phi[g as usize];
                }
                self.acoustic_local::<NP>(&d, be, &loc, &mut res, &mut scratch);
                for (l, &g) in dofs.iter().enumerate() {
                    out[g as usize] += res[l];
                }
            }
            return;
        }
        let mut buf = b.buffer.lock().expect("element buffer lock");
        buf.resize(b.dofs.len(), 0.0);
        buf.par_chunks_mut(n3).enumerate().for_each_init(
            || (vec![0.0; n3], vec![0.0; 3 * n3]),
            |(loc, scratch), (be, res)| {
                for (l, &g) in b.dofs[be * n3..(be + 1) * n3].iter().enumerate() {
                    loc[l] = phi[g as usize];
                }
                self.acoustic_local::<NP>(&d, be, loc, res, scratch);
            },
        );
        let buf = &*buf;
        out.par_iter_mut().enumerate().for_each(|(g, o)| {
            let mut s = 0.0;
            for &slot in &b.inc_slots[b.inc_offsets[g] as usize..b.inc_offsets[g + 1] as usize] {
                s += buf[slot as usize];
            }
            *o = s;
        });
    }

    fn elastic_np<const NP: usize>(&self, u: &[f64], out: &mut [f64]) {
        let n3 = NP * NP * NP;
        let d = self.d_array::<NP>();
        let b = &self.elastic;
        if rayon::current_num_threads() <= 1 {
            out.fill(0.0);
            let mut loc = vec![0.0; 3 * n3];
            let mut res = vec![0.0; 3 * n3];
            let mut scratch = vec![0.0; 9 * n3];
            for be in 0..b.metrics.len() {
                let dofs = &b.dofs[be * n3..(be + 1) * n3];
                for (l, &g) in dofs.iter().enumerate() {
                    let g = 3 * g as usize;
                    loc[3 * l..3 * l + 3].copy_from_slice(&u[g..g + 3]);
                }
                self.elastic_local::<NP>(&d, be, &loc, &mut res, &mut scratch);
                for (l, &g) in dofs.iter().enumerate() {
                    let g = 3 * g as usize;
                    for a in 0..3 {
                        out[g + a] += res[3 * l + a];
                    }
                }
            }
            return;
        }
        let mut buf = b.buffer.lock().expect("element buffer lock");
        buf.resize(3 * b.dofs.len(), 0.0);
        buf.par_chunks_mut(3 * n3).enumerate().for_each_init(
            || (vec![0.0; 3 * n3], vec![0.0; 9 * n3]),
            |(loc, scratch), (be, res)| {
                for (l, &g) in b.dofs[be * n3..(be + 1) * n3].iter().enumerate() {
                    let g = 3 * g as usize;
                    loc[3 * l..3 * l + 3].copy_from_slice(&u[g..g + 3]);
                }
                self.elastic_local::<NP>(&d, be, loc, res, scratch);
            },
        );
        let buf = &*buf;
        out.par_chunks_mut(3).enumerate().for_each(|(g, o)| {
            let mut s = [0.0; 3];
            for &slot in &b.inc_slots[b.inc_offsets[g] as usize..b.inc_offsets[g + 1] as usize] {
                let slot = 3 * slot as usize;
                for a in 0..3 {
                    s[a] += buf[slot + a];
                }
            }
            o.copy_from_slice(&s);
        });
    }

    /// fluid += C u: normal-displacement flux of the solid into the fluid.
    pub fn add_coupling_to_fluid(&self, u: &[f64], fluid: &mut [f64]) {
        for c in &self.coupling {
            let s = 3 * c.solid as usize;
            fluid[c.fluid as usize] += c.normal[0] * u[s] + c.normal[1] * u[s + 1] + c.normal[2] * u[s + 2];
        }
    }

    /// solid −= Cᵀ φ̈: interface traction p n with p = −φ̈.
    pub fn add_coupling_to_solid(&self, phi_ddot: &[f64], solid: &mut [f64]) {
        for c in &self.coupling {
            let s = 3 * c.solid as usize;
            let a = phi_ddot[c.fluid as usize];
            for k in 0..3 {
                solid[s + k] -= c.normal[k] * a;
            }
        }
    }

    /// fluid −= B_a φ̇.
    pub fn add_stacey_fluid(&self, phi_dot: &[f64], fluid: &mut [f64]) {
        for &(f, c) in &self.stacey_fluid {
            fluid[f as usize] -= c * phi_dot[f as usize];
        }
    }

    /// solid −= B_e u̇.
    pub fn add_stacey_solid(&self, u_dot: &[f64], solid: &mut [f64]) {
        for (s, a) in &self.stacey_solid {
            let s = 3 * *s as usize;
            let v = [u_dot[s], u_dot[s + 1], u_dot[s + 2]];
            let t = sym_mul(a, v);
            for k in 0..3 {
                solid[s + k] -= t[k];
            }
        }
    }

    /// Rate of work done by the absorbing terms on the given velocities;
    /// never positive.
    pub fn stacey_power(&self, phi_dot: &[f64], u_dot: &[f64]) -> f64 {
        let mut p = 0.0;
        for &(f, c) in &self.stacey_fluid {
            let v = phi_dot[f as usize];
            p -= c * v * v;
        }
        for (s, a) in &self.stacey_solid {
            let s = 3 * *s as usize;
            let v = [u_dot[s], u_dot[s + 1], u_dot[s + 2]];
            let t = sym_mul(a, v);
            p -= t[0] * v[0] + t[1] * v[1] + t[2] * v[2];
        }
        p
    }

    /// Zeros the constrained normal components on symmetry nodes.
    pub fn apply_symmetry(&self, solid: &mut [f64]) {
        for s in &self.symmetry {
            let base = 3 * s.solid as usize;
            for a in 0..3 {
                if s.fixed[a] {
                    solid[base + a] = 0.0;
                }
            }
        }
    }

    /// Coupling loads for a state: (C u on fluid DOFs, −Cᵀ φ̈ on solid DOFs).
    pub fn coupling_terms(&self, state: &FieldVectors) -> (Vec<f64>, Vec<f64>) {
        let mut f = vec![0.0; self.dofmap.n_fluid()];
        let mut s = vec![0.0; 3 * self.dofmap.n_solid()];
        self.add_coupling_to_fluid(&state.u, &mut f);
        self.add_coupling_to_solid(&state.phi_ddot, &mut s);
        (f, s)
    }

    /// Absorbing loads for a state: (−B_a φ̇, −B_e u̇).
    pub fn stacey_terms(&self, state: &FieldVectors) -> (Vec<f64>, Vec<f64>) {
        let mut f = vec![0.0; self.dofmap.n_fluid()];
        let mut s = vec![0.0; 3 * self.dofmap.n_solid()];
        self.add_stacey_fluid(&state.phi_dot, &mut f);
        self.add_stacey_solid(&state.u_dot, &mut s);
        (f, s)
    }
}

/// Symmetric 3×3 packed [xx, yy, zz, xy, xz, yz] times v.
fn sym_mul(a: &[f64; 6], v: [f64; 3]) -> [f64; 3] {
    [
        a[0] * v[0] + a[3] * v[1] + a[4] * v[2],
        a[3] * v[0] + a[1] * v[1] + a[5] * v[2],
        a[4] * v[0] + a[5] * v[1] + a[2] * v[2],
    ]
}

fn is_affine(jac: &[[[f64; 3]; 3]]) -> bool {
    let j0 = &jac[0];
    let scale = j0.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    jac.iter().all(|j| j.iter().flatten().zip(j0.iter().flatten()).all(|(a, b)| (a - b).abs() <= 1e-13 * scale))
}
