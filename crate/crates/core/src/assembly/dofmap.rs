//! Global numbering of GLL points and their fluid/solid DOF indices.

use std::collections::HashMap;

use super::AssemblyError;
use crate::gll::GllRule;
use crate::material::{DomainKind, MaterialTable};
use crate::mesh::{trilinear_point, HexMesh, Point3};

/// Points closer than this (max-norm, metres) are the same global node.
pub const MERGE_TOLERANCE: f64 = 1e-9;
const HASH_CELL: f64 = 1e-7;
const NONE: u32 = u32::MAX;

/// Maps element-local GLL points to global nodes, and nodes to fluid
/// (one potential) and solid (three displacement) DOFs. Interface nodes
/// carry both.
#[derive(Debug, Clone)]
pub struct DofMap {
    n_points_1d: usize,
    nodes: Vec<Point3>,
    /// Global node of local point i + n(j + n k) of element e at e·n³ + local.
    elem_nodes: Vec<u32>,
    elem_kind: Vec<DomainKind>,
    fluid_of_node: Vec<u32>,
    solid_of_node: Vec<u32>,
    fluid_nodes: Vec<u32>,
    solid_nodes: Vec<u32>,
    n_interface: usize,
}

impl DofMap {
    pub fn build(mesh: &HexMesh, table: &MaterialTable, rule: &GllRule) -> Result<Self, AssemblyError> {
        let n = rule.len();
        let n3 = n * n * n;
        let x = rule.nodes();
        let mut elem_kind = Vec::with_capacity(mesh.n_elements());
        for el in mesh.elements() {
            elem_kind.push(table.get(el.material)?.domain_kind());
        }
        for e in 0..mesh.n_elements() {
            crate::mesh::check_positive_det(mesh, e, rule)?;
        }

        // Geometric merge: each point is looked up in its hash cell, plus the
        // neighbouring cells it lies within tolerance of.
        let mut cells: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        let mut unique: Vec<Point3> = Vec::new();
        let mut raw = Vec::with_capacity(mesh.n_elements() * n3);
        for e in 0..mesh.n_elements() {
            let corners = mesh.corner_coords(e);
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        let p = trilinear_point(&corners, [x[i], x[j], x[k]]);
                        raw.push(merge_point(&mut cells, &mut unique, p));
                    }
                }
            }
        }

        // Lexicographic numbering by rounded coordinates.
        let key = |p: &Point3| p.map(|v| (v / MERGE_TOLERANCE).round() as i64);
        let mut order: Vec<u32> = (0..unique.len() as u32).collect();
        order.sort_by_key(|&u| key(&unique[u as usize]));
        let mut rank = vec![0u32; unique.len()];
        for (r, &u) in order.iter().enumerate() {
            rank[u as usize] = r as u32;
        }
        let nodes: Vec<Point3> = order.iter().map(|&u| unique[u as usize]).collect();
        let elem_nodes: Vec<u32> = raw.iter().map(|&u| rank[u as usize]).collect();

        check_conformity(mesh, n, &elem_nodes, nodes.len())?;

        let mut is_fluid = vec![false; nodes.len()];
        let mut is_solid = vec![false; nodes.len()];
        for (e, kind) in elem_kind.iter().enumerate() {
            let flags = if *kind == DomainKind::Acoustic { &mut is_fluid } else { &mut is_solid };
            for &g in &elem_nodes[e * n3..(e + 1) * n3] {
                flags[g as usize] = true;
            }
        }
        let mut fluid_of_node = vec![NONE; nodes.len()];
        let mut solid_of_node = vec![NONE; nodes.len()];
        let mut fluid_nodes = Vec::new();
        let mut solid_nodes = Vec::new();
        let mut n_interface = 0;
        for g in 0..nodes.len() {
            if is_fluid[g] {
                fluid_of_node[g] = fluid_nodes.len() as u32;
                fluid_nodes.push(g as u32);
            }
            if is_solid[g] {
                solid_of_node[g] = solid_nodes.len() as u32;
                solid_nodes.push(g as u32);
            }
            if is_fluid[g] && is_solid[g] {
                n_interface += 1;
            }
        }
        Ok(DofMap {
            n_points_1d: n,
            nodes,
            elem_nodes,
            elem_kind,
            fluid_of_node,
            solid_of_node,
            fluid_nodes,
            solid_nodes,
            n_interface,
        })
    }

    pub fn n_points_1d(&self) -> usize {
        self.n_points_1d
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_fluid(&self) -> usize {
        self.fluid_nodes.len()
    }

    /// Solid nodes; the solid DOF count is three times this.
    pub fn n_solid(&self) -> usize {
        self.solid_nodes.len()
    }

    pub fn n_interface(&self) -> usize {
        self.n_interface
    }

    pub fn node(&self, g: usize) -> Point3 {
        self.nodes[g]
    }

    pub fn element_kind(&self, e: usize) -> DomainKind {
        self.elem_kind[e]
    }

    pub fn n_elements(&self) -> usize {
        self.elem_kind.len()
    }

    /// Global nodes of element `e` in local order.
    pub fn element_nodes(&self, e: usize) -> &[u32] {
        let n3 = self.n_points_1d.pow(3);
        &self.elem_nodes[e * n3..(e + 1) * n3]
    }

    pub fn fluid_dof(&self, g: usize) -> Option<usize> {
        let v = self.fluid_of_node[g];
        (v != NONE).then_some(v as usize)
    }

    pub fn solid_node(&self, g: usize) -> Option<usize> {
        let v = self.solid_of_node[g];
        (v != NONE).then_some(v as usize)
    }

    pub fn fluid_node(&self, dof: usize) -> usize {
        self.fluid_nodes[dof] as usize
    }

    pub fn solid_global_node(&self, s: usize) -> usize {
        self.solid_nodes[s] as usize
    }
}

fn merge_point(cells: &mut HashMap<[i64; 3], Vec<u32>>, unique: &mut Vec<Point3>, p: Point3) -> u32 {
    let base = p.map(|v| (v / HASH_CELL).floor() as i64);
    let mut range = [[0i64; 2]; 3];
    for a in 0..3 {
        let lo = base[a] as f64 * HASH_CELL;
        let hi = lo + HASH_CELL;
        range[a] = [
            if p[a] - lo <= MERGE_TOLERANCE { -1 } else { 0 },
            if hi - p[a] <= MERGE_TOLERANCE { 1 } else { 0 },
        ];
    }
    for dz in range[2][0]..=range[2][1] {
        for dy in range[1][0]..=range[1][1] {
            for dx in range[0][0]..=range[0][1] {
                if let Some(list) = cells.get(&[base[0] + dx, base[1] + dy, base[2] + dz]) {
                    for &u in list {
                        let q = unique[u as usize];
                        if (0..3).all(|a| (p[a] - q[a]).abs() <= MERGE_TOLERANCE) {
                            return u;
                        }
                    }
                }
            }
        }
    }
    let id = unique.len() as u32;
    unique.push(p);
    cells.entry(base).or_default().push(id);
    id
}

/// Face-interior points of a topologically exterior face may belong to that
/// element only; otherwise another element touches the face without sharing
/// its corners (hanging nodes or duplicated corner nodes).
fn check_conformity(mesh: &HexMesh, n: usize, elem_nodes: &[u32], n_nodes: usize) -> Result<(), AssemblyError> {
    let n3 = n * n * n;
    let mut owner = vec![u32::MAX; n_nodes];
    let mut shared = vec![false; n_nodes];
    for e in 0..mesh.n_elements() {
        for &g in &elem_nodes[e * n3..(e + 1) * n3] {
            let g = g as usize;
            if owner[g] == u32::MAX {
                owner[g] = e as u32;
            } else if owner[g] != e as u32 {
                shared[g] = true;
            }
        }
    }
    for e in 0..mesh.n_elements() {
        for f in 0..6 {
            if mesh.neighbor(e, f).is_some() {
                continue;
            }
            for (q, &l) in crate::mesh::face_local_points(n, f).iter().enumerate() {
                let (a, b) = (q % n, q / n);
                if a == 0 || b == 0 || a == n - 1 || b == n - 1 {
                    continue;
                }
                let g = elem_nodes[e * n3 + l] as usize;
                if shared[g] {
                    let other = (0..mesh.n_elements())
                        .find(|&o| o != e && elem_nodes[o * n3..(o + 1) * n3].contains(&(g as u32)))
                        .unwrap_or(e);
                    return Err(AssemblyError::NonConformal { element: e, face: f, other });
                }
            }
        }
    }
    Ok(())
}
