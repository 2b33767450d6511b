//! Surface terms gathered per global node: fluid-solid coupling, Stacey
//! absorbing coefficients and symmetry constraints.

use std::collections::BTreeMap;

use log::debug;

use super::{AssemblyError, DofMap};
use crate::gll::GllRule;
use crate::material::{DomainKind, MaterialTable};
use crate::mesh::{element_geometry, ElementGeometry, HexMesh, FACESET_ABSORBING, FACESET_FREE, FACESET_SYMMETRY};

/// Interface node: Σ w |J_s| n over incident coupling faces, n pointing from
/// fluid to solid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingNode {
    pub fluid: u32,
    pub solid: u32,
    pub normal: [f64; 3],
}

/// Solid node whose listed displacement components are held at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymmetryNode {
    pub solid: u32,
    pub fixed: [bool; 3],
}

/// Normals of a symmetry face must align with an axis to this tolerance.
const AXIS_TOL: f64 = 1e-9;

#[derive(Default)]
pub(super) struct FaceAccumulator {
    coupling: BTreeMap<u32, CouplingNode>,
    stacey_fluid: BTreeMap<u32, f64>,
    stacey_solid: BTreeMap<u32, [f64; 6]>,
    symmetry: BTreeMap<u32, [bool; 3]>,
    /// Per element, the boundary condition listed for each local face.
    face_kind: Option<Vec<[Option<&'static str>; 6]>>,
}

impl FaceAccumulator {
    fn face_kinds(&mut self, mesh: &HexMesh) -> Result<&Vec<[Option<&'static str>; 6]>, AssemblyError> {
        if self.face_kind.is_none() {
            let mut kinds = vec![[None; 6]; mesh.n_elements()];
            for (name, faces) in mesh.face_sets() {
                let tag = match name.as_str() {
                    FACESET_ABSORBING => FACESET_ABSORBING,
                    FACESET_FREE => FACESET_FREE,
                    FACESET_SYMMETRY => FACESET_SYMMETRY,
                    other => {
                        debug!("face set '{other}' carries no boundary condition");
                        continue;
                    }
                };
                for f in faces {
                    let fe = |reason: &str| AssemblyError::FaceSet {
                        name: name.clone(),
                        element: f.element,
                        face: f.face as usize,
                        reason: reason.into(),
                    };
                    if mesh.neighbor(f.element, f.face as usize).is_some() {
                        return Err(fe("boundary condition on an interior face"));
                    }
                    let slot = &mut kinds[f.element][f.face as usize];
                    if slot.is_some_and(|k| k != tag) {
                        return Err(fe("face listed under two boundary conditions"));
                    }
                    *slot = Some(tag);
                }
            }
            self.face_kind = Some(kinds);
        }
        Ok(self.face_kind.as_ref().expect("initialized"))
    }

    pub(super) fn add_element(
        &mut self,
        mesh: &HexMesh,
        table: &MaterialTable,
        dofmap: &DofMap,
        rule: &GllRule,
        e: usize,
        geo: &ElementGeometry,
    ) -> Result<(), AssemblyError> {
        let kinds = self.face_kinds(mesh)?[e];
        let kind = dofmap.element_kind(e);
        let props = table.get(mesh.elements()[e].material)?;
        let nodes = dofmap.element_nodes(e);
        for f in 0..6 {
            let fg = &geo.faces[f];
            if let Some(nb) = mesh.neighbor(e, f) {
                if kind == DomainKind::Acoustic && dofmap.element_kind(nb) == DomainKind::Elastic {
                    self.add_coupling_face(mesh, dofmap, rule, e, f, nb, geo)?;
                }
                continue;
            }
            match kinds[f] {
                Some(FACESET_ABSORBING) => {
                    for (q, &l) in fg.local_points.iter().enumerate() {
                        let g = nodes[l] as usize;
                        let w = fg.weights[q] * fg.surface_jacobian[q];
                        match kind {
                            DomainKind::Acoustic => {
                                let dof = dofmap.fluid_dof(g).expect("fluid node") as u32;
                                *self.stacey_fluid.entry(dof).or_insert(0.0) += w / (props.rho * props.vp);
                            }
                            DomainKind::Elastic => {
                                let s = dofmap.solid_node(g).expect("solid node") as u32;
                                let n = fg.normals[q];
                                let a = self.stacey_solid.entry(s).or_insert([0.0; 6]);
                                let (cp, cs) = (w * props.rho * props.vp, w * props.rho * props.vs);
                                let pairs = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];
                                for (slot, (i, j)) in pairs.into_iter().enumerate() {
                                    let nn = n[i] * n[j];
                                    let id = if i == j { 1.0 } else { 0.0 };
                                    a[slot] += cp * nn + cs * (id - nn);
                                }
                            }
                        }
                    }
                }
                Some(FACESET_SYMMETRY) if kind == DomainKind::Elastic => {
                    for (q, &l) in fg.local_points.iter().enumerate() {
                        let n = fg.normals[q];
                        let axis = (0..3).find(|&a| n[a].abs() >= 1.0 - AXIS_TOL).ok_or_else(|| {
                            AssemblyError::FaceSet {
                                name: FACESET_SYMMETRY.into(),
                                element: e,
                                face: f,
                                reason: "symmetry faces must be normal to a coordinate axis".into(),
                            }
                        })?;
                        let s = dofmap.solid_node(nodes[l] as usize).expect("solid node") as u32;
                        self.symmetry.entry(s).or_insert([false; 3])[axis] = true;
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn add_coupling_face(
        &mut self,
        mesh: &HexMesh,
        dofmap: &DofMap,
        rule: &GllRule,
        e: usize,
        f: usize,
        nb: usize,
        geo: &ElementGeometry,
    ) -> Result<(), AssemblyError> {
        let fg = &geo.faces[f];
        let nodes = dofmap.element_nodes(e);
        let nb_face = (0..6).find(|&k| mesh.neighbor(nb, k) == Some(e)).expect("neighbour relation is mutual");
        let nb_geo = element_geometry(mesh, nb, rule)?;
        let nb_nodes = dofmap.element_nodes(nb);
        let solid_normals: BTreeMap<u32, [f64; 3]> = nb_geo.faces[nb_face]
            .local_points
            .iter()
            .zip(&nb_geo.faces[nb_face].normals)
            .map(|(&l, &n)| (nb_nodes[l], n))
            .collect();
        for (q, &l) in fg.local_points.iter().enumerate() {
            let g = nodes[l];
            let n = fg.normals[q];
            let ns = solid_normals.get(&g).ok_or(AssemblyError::CouplingNormal { element: e, face: f })?;
            if (0..3).any(|a| (n[a] + ns[a]).abs() > 1e-8) {
                return Err(AssemblyError::CouplingNormal { element: e, face: f });
            }
            let w = fg.weights[q] * fg.surface_jacobian[q];
            let entry = self.coupling.entry(g).or_insert(CouplingNode {
                fluid: dofmap.fluid_dof(g as usize).expect("interface node has a fluid DOF") as u32,
                solid: dofmap.solid_node(g as usize).expect("interface node has a solid index") as u32,
                normal: [0.0; 3],
            });
            for a in 0..3 {
                entry.normal[a] += w * n[a];
            }
        }
        Ok(())
    }

    #[allow(clippy::type_complexity)]
    pub(super) fn finish(self) -> (Vec<CouplingNode>, Vec<(u32, f64)>, Vec<(u32, [f64; 6])>, Vec<SymmetryNode>) {
        (
            self.coupling.into_values().collect(),
            self.stacey_fluid.into_iter().collect(),
            self.stacey_solid.into_iter().collect(),
            self.symmetry.into_iter().map(|(solid, fixed)| SymmetryNode { solid, fixed }).collect(),
        )
    }
}
