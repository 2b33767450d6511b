//! Overlay-grid mesh generation: one axis-aligned hexahedron per voxel.

use std::collections::BTreeMap;

use super::{FaceRef, HexElement, HexMesh, MeshError, Point3, FACESET_ABSORBING, FACESET_FREE, FACESET_SYMMETRY};

/// Cartesian voxel grid with a material id per voxel (x-fastest order).
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelVolume {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: Point3,
    pub materials: Vec<u32>,
}

impl VoxelVolume {
    pub fn uniform(dims: [usize; 3], spacing: [f64; 3], material: u32) -> Self {
        VoxelVolume { dims, spacing, origin: [0.0; 3], materials: vec![material; dims.iter().product()] }
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    /// Voxel-centre coordinates.
    pub fn center(&self, i: usize, j: usize, k: usize) -> Point3 {
        [
            self.origin[0] + (i as f64 + 0.5) * self.spacing[0],
            self.origin[1] + (j as f64 + 0.5) * self.spacing[1],
            self.origin[2] + (k as f64 + 0.5) * self.spacing[2],
        ]
    }

    /// Assigns `material` to every voxel whose centre lies in the box [lo, hi].
    pub fn fill_box(&mut self, lo: Point3, hi: Point3, material: u32) {
        for k in 0..self.dims[2] {
            for j in 0..self.dims[1] {
                for i in 0..self.dims[0] {
                    let c = self.center(i, j, k);
                    if (0..3).all(|a| c[a] >= lo[a] && c[a] <= hi[a]) {
                        let idx = self.index(i, j, k);
                        self.materials[idx] = material;
                    }
                }
            }
        }
    }
}

/// Boundary condition applied to one side of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryKind {
    /// Stacey first-order paraxial absorbing condition.
    #[default]
    Absorbing,
    /// Natural condition: traction-free for solids, rigid for fluids.
    Free,
    /// Zero normal displacement, zero shear traction.
    Symmetry,
}

impl BoundaryKind {
    pub fn face_set_name(self) -> &'static str {
        match self {
            BoundaryKind::Absorbing => FACESET_ABSORBING,
            BoundaryKind::Free => FACESET_FREE,
            BoundaryKind::Symmetry => FACESET_SYMMETRY,
        }
    }
}

/// Boundary kind per box side, in local-face order -x +x -y +y -z +z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BoundaryPolicy {
    pub sides: [BoundaryKind; 6],
}

impl BoundaryPolicy {
    pub fn all(kind: BoundaryKind) -> Self {
        BoundaryPolicy { sides: [kind; 6] }
    }
}

/// Converts a voxel volume into a conformal hexahedral mesh.
pub fn voxels_to_hexmesh(vol: &VoxelVolume, policy: &BoundaryPolicy) -> Result<HexMesh, MeshError> {
    let [nx, ny, nz] = vol.dims;
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(MeshError::EmptyVolume(vol.dims));
    }
    if vol.spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(MeshError::InvalidSpacing(vol.spacing));
    }
    if vol.materials.len() != nx * ny * nz {
        return Err(MeshError::VoxelCount { expected: nx * ny * nz, got: vol.materials.len() });
    }

    let node_id = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([
                    vol.origin[0] + i as f64 * vol.spacing[0],
                    vol.origin[1] + j as f64 * vol.spacing[1],
                    vol.origin[2] + k as f64 * vol.spacing[2],
                ]);
            }
        }
    }

    let mut elements = Vec::with_capacity(nx * ny * nz);
    let mut face_sets: BTreeMap<String, Vec<FaceRef>> = BTreeMap::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let e = elements.len();
                elements.push(HexElement {
                    corners: [
                        node_id(i, j, k),
                        node_id(i + 1, j, k),
                        node_id(i + 1, j + 1, k),
                        node_id(i, j + 1, k),
                        node_id(i, j, k + 1),
                        node_id(i + 1, j, k + 1),
                        node_id(i + 1, j + 1, k + 1),
                        node_id(i, j + 1, k + 1),
                    ],
                    material: vol.materials[vol.index(i, j, k)],
                });
                let on_side = [i == 0, i + 1 == nx, j == 0, j + 1 == ny, k == 0, k + 1 == nz];
                for (side, &hit) in on_side.iter().enumerate() {
                    if hit {
                        let name = policy.sides[side].face_set_name();
                        face_sets.entry(name.to_string()).or_default().push(FaceRef { element: e, face: side as u8 });
                    }
                }
            }
        }
    }
    HexMesh::new(nodes, elements, face_sets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_voxel() {
        let vol = VoxelVolume::uniform([1, 1, 1], [1e-3; 3], 5);
        let mesh = voxels_to_hexmesh(&vol, &BoundaryPolicy::default()).unwrap();
        assert_eq!(mesh.n_elements(), 1);
        assert_eq!(mesh.nodes().len(), 8);
        assert_eq!(mesh.face_set(FACESET_ABSORBING).len(), 6);
        assert_eq!(mesh.nodes()[7], [1e-3, 1e-3, 1e-3]);
    }

    #[test]
    fn two_by_two_by_two() {
        let vol = VoxelVolume::uniform([2, 2, 2], [1.0; 3], 1);
        let mesh = voxels_to_hexmesh(&vol, &BoundaryPolicy::default()).unwrap();
        assert_eq!(mesh.n_elements(), 8);
        assert_eq!(mesh.nodes().len(), 27);
        assert_eq!(mesh.face_set(FACESET_ABSORBING).len(), 24);
        // Element 0's +x face is shared with element 1, and the node ids agree.
        assert_eq!(mesh.neighbor(0, 1), Some(1));
        let a: Vec<usize> = super::super::FACE_CORNERS[1].iter().map(|&c| mesh.elements()[0].corners[c]).collect();
        let b: Vec<usize> = super::super::FACE_CORNERS[0].iter().map(|&c| mesh.elements()[1].corners[c]).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn every_interior_face_is_conformal() {
        let vol = VoxelVolume::uniform([3, 2, 4], [0.5, 1.0, 2.0], 1);
        let mesh = voxels_to_hexmesh(&vol, &BoundaryPolicy::default()).unwrap();
        for e in 0..mesh.n_elements() {
            for f in 0..6 {
                if let Some(nb) = mesh.neighbor(e, f) {
                    let opposite = f ^ 1;
                    assert_eq!(mesh.neighbor(nb, opposite), Some(e));
                    let mut a: Vec<usize> = super::super::FACE_CORNERS[f].iter().map(|&c| mesh.elements()[e].corners[c]).collect();
                    let mut b: Vec<usize> =
                        super::super::FACE_CORNERS[opposite].iter().map(|&c| mesh.elements()[nb].corners[c]).collect();
                    a.sort();
                    b.sort();
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn mixed_policy() {
        let mut policy = BoundaryPolicy::all(BoundaryKind::Symmetry);
        policy.sides[4] = BoundaryKind::Absorbing;
        policy.sides[5] = BoundaryKind::Free;
        let vol = VoxelVolume::uniform([1, 1, 3], [1.0; 3], 1);
        let mesh = voxels_to_hexmesh(&vol, &policy).unwrap();
        assert_eq!(mesh.face_set(FACESET_SYMMETRY).len(), 12);
        assert_eq!(mesh.face_set(FACESET_ABSORBING), &[FaceRef { element: 0, face: 4 }]);
        assert_eq!(mesh.face_set(FACESET_FREE), &[FaceRef { element: 2, face: 5 }]);
    }

    #[test]
    fn empty_and_bad_spacing() {
        let vol = VoxelVolume::uniform([0, 1, 1], [1.0; 3], 1);
        assert!(matches!(voxels_to_hexmesh(&vol, &BoundaryPolicy::default()), Err(MeshError::EmptyVolume(_))));
        let vol = VoxelVolume::uniform([1, 1, 1], [1.0, 0.0, 1.0], 1);
        assert!(matches!(voxels_to_hexmesh(&vol, &BoundaryPolicy::default()), Err(MeshError::InvalidSpacing(_))));
    }

    #[test]
    fn fill_box_by_centres() {
        let mut vol = VoxelVolume::uniform([1, 1, 4], [1.0; 3], 5);
        vol.fill_box([-1.0, -1.0, 1.0], [2.0, 2.0, 3.0], 4);
        assert_eq!(vol.materials, vec![5, 4, 4, 5]);
    }
}
