//! Hexahedral meshes: connectivity, voxel overlay-grid generation, geometric
//! mapping at GLL points and scaled-Jacobian quality.
//!
//! Corner ordering: the bottom face counter-clockwise seen from +z
//! (corners 0..3), then the top face in the same order (corners 4..7).
//! Reference axes run ξ: 0→1, η: 0→3, ζ: 0→4. Local faces are numbered
//! 0:-ξ 1:+ξ 2:-η 3:+η 4:-ζ 5:+ζ, which coincide with -x..+z for
//! axis-aligned cells.

mod geometry;
mod io;
mod quality;
mod voxel;

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

pub use geometry::{
    element_geometry, element_min_gll_spacing, invert_trilinear, min_gll_spacing, trilinear_jacobian,
    trilinear_point, ElementGeometry, FaceGeometry,
};
pub(crate) use geometry::{check_positive_det, det3, face_local_points, inv3};
pub use io::{read_shex, read_svox, write_shex, write_svox, SvoxData};
pub use quality::{quality_report, scaled_jacobian, QualityReport, ScaledJacobian, QUALITY_WARN_THRESHOLD};
pub use voxel::{voxels_to_hexmesh, BoundaryKind, BoundaryPolicy, VoxelVolume};

pub type Point3 = [f64; 3];

/// Reference-space signs (ξ, η, ζ) of the eight corners.
pub const CORNER_SIGNS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Corner indices of each local face.
pub const FACE_CORNERS: [[usize; 4]; 6] = [
    [0, 3, 7, 4],
    [1, 2, 6, 5],
    [0, 1, 5, 4],
    [3, 2, 6, 7],
    [0, 1, 2, 3],
    [4, 5, 6, 7],
];

/// Face-set names the solver interprets.
pub const FACESET_ABSORBING: &str = "absorbing";
pub const FACESET_FREE: &str = "free";
pub const FACESET_SYMMETRY: &str = "symmetry";

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("voxel volume has a zero-size axis: {0:?}")]
    EmptyVolume([usize; 3]),
    #[error("voxel spacing must be positive, got {0:?}")]
    InvalidSpacing([f64; 3]),
    #[error("voxel volume holds {got} values, expected {expected}")]
    VoxelCount { expected: usize, got: usize },
    #[error("element {element}: {reason}")]
    InvalidElement { element: usize, reason: String },
    #[error("face set '{name}': element {element} face {face}: {reason}")]
    InvalidFaceSet { name: String, element: usize, face: usize, reason: String },
    #[error("element {element} is inverted (Jacobian determinant {det:e} at a GLL point)")]
    InvertedElement { element: usize, det: f64 },
    #[error("mesh is unusable: scaled Jacobian <= 0 in elements {elements:?}")]
    Unusable { elements: Vec<usize> },
    #[error("mesh is empty")]
    EmptyMesh,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One hex-8 element: corner node ids and material id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HexElement {
    pub corners: [usize; 8],
    pub material: u32,
}

/// A local face of an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FaceRef {
    pub element: usize,
    pub face: u8,
}

/// Conformal hexahedral mesh with named boundary face sets.
#[derive(Debug, Clone, PartialEq)]
pub struct HexMesh {
    nodes: Vec<Point3>,
    elements: Vec<HexElement>,
    face_sets: BTreeMap<String, Vec<FaceRef>>,
    /// Element across each local face, if any.
    neighbors: Vec<[Option<usize>; 6]>,
}

impl HexMesh {
    /// Builds a mesh and checks its topological invariants.
    pub fn new(
        nodes: Vec<Point3>,
        elements: Vec<HexElement>,
        face_sets: BTreeMap<String, Vec<FaceRef>>,
    ) -> Result<Self, MeshError> {
        for (e, el) in elements.iter().enumerate() {
            for (k, &c) in el.corners.iter().enumerate() {
                if c >= nodes.len() {
                    return Err(MeshError::InvalidElement {
                        element: e,
                        reason: format!("corner {k} references missing node {c}"),
                    });
                }
                if el.corners[..k].contains(&c) {
                    return Err(MeshError::InvalidElement {
                        element: e,
                        reason: format!("node {c} appears twice"),
                    });
                }
            }
        }
        let neighbors = face_neighbors(&elements)?;
        let mesh = HexMesh { nodes, elements, face_sets: BTreeMap::new(), neighbors };
        let mut mesh = mesh;
        for (name, faces) in face_sets {
            mesh.add_face_set(&name, faces)?;
        }
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[Point3] {
        &self.nodes
    }

    pub fn elements(&self) -> &[HexElement] {
        &self.elements
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn face_sets(&self) -> &BTreeMap<String, Vec<FaceRef>> {
        &self.face_sets
    }

    pub fn face_set(&self, name: &str) -> &[FaceRef] {
        self.face_sets.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Element across local face `face` of `element`.
    pub fn neighbor(&self, element: usize, face: usize) -> Option<usize> {
        self.neighbors[element][face]
    }

    pub fn corner_coords(&self, element: usize) -> [Point3; 8] {
        let el = &self.elements[element];
        let mut out = [[0.0; 3]; 8];
        for (o, &c) in out.iter_mut().zip(&el.corners) {
            *o = self.nodes[c];
        }
        out
    }

    /// Axis-aligned bounding box of all nodes.
    pub fn bounding_box(&self) -> (Point3, Point3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.nodes {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    /// Adds (or extends) a face set. Faces must lie on the exterior or on a
    /// material interface.
    pub fn add_face_set(&mut self, name: &str, faces: Vec<FaceRef>) -> Result<(), MeshError> {
        for f in &faces {
            if f.element >= self.elements.len() || f.face > 5 {
                return Err(MeshError::InvalidFaceSet {
                    name: name.to_string(),
                    element: f.element,
                    face: f.face as usize,
                    reason: "no such element face".into(),
                });
            }
            if let Some(nb) = self.neighbors[f.element][f.face as usize] {
                if self.elements[nb].material == self.elements[f.element].material {
                    return Err(MeshError::InvalidFaceSet {
                        name: name.to_string(),
                        element: f.element,
                        face: f.face as usize,
                        reason: "face is interior and not a material interface".into(),
                    });
                }
            }
        }
        let set = self.face_sets.entry(name.to_string()).or_default();
        set.extend(faces);
        set.sort_unstable();
        set.dedup();
        Ok(())
    }

    /// Exterior faces whose four corners all lie on the given bounding-box
    /// side (0:-x 1:+x 2:-y 3:+y 4:-z 5:+z), within `tol` metres.
    pub fn exterior_faces_on_side(&self, side: usize, tol: f64) -> Vec<FaceRef> {
        let (lo, hi) = self.bounding_box();
        let axis = side / 2;
        let plane = if side % 2 == 0 { lo[axis] } else { hi[axis] };
        let mut out = Vec::new();
        for (e, el) in self.elements.iter().enumerate() {
            for f in 0..6 {
                if self.neighbors[e][f].is_some() {
                    continue;
                }
                let on_plane = FACE_CORNERS[f]
                    .iter()
                    .all(|&c| (self.nodes[el.corners[c]][axis] - plane).abs() <= tol);
                if on_plane {
                    out.push(FaceRef { element: e, face: f as u8 });
                }
            }
        }
        out
    }

    /// Maps every element's material id through `f`.
    pub fn set_materials(&mut self, mut f: impl FnMut(usize, &HexElement) -> u32) {
        for e in 0..self.elements.len() {
            let m = f(e, &self.elements[e]);
            self.elements[e].material = m;
        }
    }

    /// Node coordinates, mutable. Topology is unaffected.
    pub fn nodes_mut(&mut self) -> &mut [Point3] {
        &mut self.nodes
    }
}

fn face_neighbors(elements: &[HexElement]) -> Result<Vec<[Option<usize>; 6]>, MeshError> {
    let mut faces: HashMap<[usize; 4], Vec<(usize, usize)>> = HashMap::new();
    for (e, el) in elements.iter().enumerate() {
        for (f, fc) in FACE_CORNERS.iter().enumerate() {
            let mut key = fc.map(|c| el.corners[c]);
            key.sort_unstable();
            faces.entry(key).or_default().push((e, f));
        }
    }
    let mut neighbors = vec![[None; 6]; elements.len()];
    for owners in faces.values() {
        match owners.as_slice() {
            [_] => {}
            [(e0, f0), (e1, f1)] => {
                neighbors[*e0][*f0] = Some(*e1);
                neighbors[*e1][*f1] = Some(*e0);
            }
            more => {
                let (e, f) = more.iter().min().copied().expect("non-empty");
                return Err(MeshError::InvalidElement {
                    element: e,
                    reason: format!("face {f} is shared by {} elements", more.len()),
                });
            }
        }
    }
    Ok(neighbors)
}
