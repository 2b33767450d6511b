//! Scaled-Jacobian element quality.

use log::warn;

use super::geometry::{det3, norm};
use super::{HexMesh, MeshError, CORNER_SIGNS};

/// Elements below this scaled Jacobian are reported as warnings.
pub const QUALITY_WARN_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledJacobian {
    /// Minimum over the eight corners, in [-1, 1].
    pub value: f64,
    /// Set when an edge has zero length; `value` is then 0.
    pub degenerate: bool,
}

/// Scaled Jacobian of one element: the minimum over its corners of the
/// determinant of the three unit edge vectors leaving the corner.
pub fn scaled_jacobian(mesh: &HexMesh, elem: usize) -> ScaledJacobian {
    let c = mesh.corner_coords(elem);
    let scale = (0..8)
        .flat_map(|a| (0..3).map(move |k| (a, k)))
        .map(|(a, k)| c[a][k].abs())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut value = f64::INFINITY;
    for (corner, s) in CORNER_SIGNS.iter().enumerate() {
        let mut m = [[0.0; 3]; 3];
        for r in 0..3 {
            let mut target = *s;
            target[r] = -target[r];
            let nb = CORNER_SIGNS.iter().position(|t| *t == target).expect("corner exists");
            // Orient every edge toward increasing reference coordinate.
            let dir = -s[r];
            let e = [
                dir * (c[nb][0] - c[corner][0]),
                dir * (c[nb][1] - c[corner][1]),
                dir * (c[nb][2] - c[corner][2]),
            ];
            let len = norm(e);
            if len <= 1e-14 * scale {
                return ScaledJacobian { value: 0.0, degenerate: true };
            }
            for a in 0..3 {
                m[a][r] = e[a] / len;
            }
        }
        value = value.min(det3(&m));
    }
    ScaledJacobian { value: value.clamp(-1.0, 1.0), degenerate: false }
}

/// Summary statistics of the scaled Jacobian over a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub average: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
    pub n_elements: usize,
    /// Elements with 0 < quality < 0.2.
    pub warnings: Vec<usize>,
}

impl std::fmt::Display for QualityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use crate::numfmt::g17;
        writeln!(f, "elements={}", self.n_elements)?;
        writeln!(f, "scaled_jacobian_average={}", g17(self.average))?;
        writeln!(f, "scaled_jacobian_std_dev={}", g17(self.std_dev))?;
        writeln!(f, "scaled_jacobian_min={}", g17(self.min))?;
        writeln!(f, "scaled_jacobian_max={}", g17(self.max))?;
        write!(f, "elements_below_{}={}", QUALITY_WARN_THRESHOLD, self.warnings.len())
    }
}

/// Quality statistics in fixed element order. Elements at or below zero make
/// the mesh unusable.
pub fn quality_report(mesh: &HexMesh) -> Result<QualityReport, MeshError> {
    if mesh.n_elements() == 0 {
        return Err(MeshError::EmptyMesh);
    }
    let values: Vec<f64> = (0..mesh.n_elements()).map(|e| scaled_jacobian(mesh, e).value).collect();
    let bad: Vec<usize> = values.iter().enumerate().filter(|(_, &v)| v <= 0.0).map(|(e, _)| e).collect();
    if !bad.is_empty() {
        return Err(MeshError::Unusable { elements: bad });
    }
    let warnings: Vec<usize> =
        values.iter().enumerate().filter(|(_, &v)| v < QUALITY_WARN_THRESHOLD).map(|(e, _)| e).collect();
    if !warnings.is_empty() {
        warn!(
            "{} element(s) have scaled Jacobian below {}: {:?}",
            warnings.len(),
            QUALITY_WARN_THRESHOLD,
            &warnings[..warnings.len().min(20)]
        );
    }
    let n = values.len() as f64;
    let average = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - average).powi(2)).sum::<f64>() / n;
    Ok(QualityReport {
        average,
        std_dev: var.sqrt(),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        n_elements: values.len(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::mesh::{voxels_to_hexmesh, BoundaryPolicy, VoxelVolume};

    #[test]
    fn perfect_cube_is_one() {
        let mesh = voxels_to_hexmesh(&VoxelVolume::uniform([1, 1, 1], [1.0; 3], 1), &BoundaryPolicy::default()).unwrap();
        let q = scaled_jacobian(&mesh, 0);
        assert_eq!(q, ScaledJacobian { value: 1.0, degenerate: false });
    }

    #[test]
    fn voxel_mesh_uniform_quality() {
        let mesh =
            voxels_to_hexmesh(&VoxelVolume::uniform([3, 2, 2], [1.0, 2.0, 0.5], 1), &BoundaryPolicy::default()).unwrap();
        let r = quality_report(&mesh).unwrap();
        assert_eq!((r.average, r.min, r.max, r.std_dev), (1.0, 1.0, 1.0, 0.0));
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn collapsed_element_is_unusable() {
        let mut mesh =
            voxels_to_hexmesh(&VoxelVolume::uniform([2, 1, 1], [1.0; 3], 1), &BoundaryPolicy::default()).unwrap();
        // Move corner 6 of element 1 onto corner 5.
        let c5 = mesh.elements()[1].corners[5];
        let c6 = mesh.elements()[1].corners[6];
        let p = mesh.nodes()[c5];
        mesh.nodes_mut()[c6] = p;
        let q = scaled_jacobian(&mesh, 1);
        assert!(q.degenerate && q.value <= 0.0);
        match quality_report(&mesh) {
            Err(MeshError::Unusable { elements }) => assert_eq!(elements, vec![1]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inverted_corner_negative() {
        let mut mesh =
            voxels_to_hexmesh(&VoxelVolume::uniform([1, 1, 1], [1.0; 3], 1), &BoundaryPolicy::default()).unwrap();
        mesh.nodes_mut()[7] = [0.0, 1.0, -0.5];
        assert!(scaled_jacobian(&mesh, 0).value < 0.0);
    }

    #[test]
    fn skewed_element_warns() {
        let mut mesh =
            voxels_to_hexmesh(&VoxelVolume::uniform([1, 1, 1], [1.0; 3], 1), &BoundaryPolicy::default()).unwrap();
        // Shear the top face far along x: corner angle drops, quality ≈ 0.1.
        for id in [4, 5, 6, 7] {
            mesh.nodes_mut()[id][0] += 10.0;
        }
        let r = quality_report(&mesh).unwrap();
        assert!(r.min > 0.0 && r.min < QUALITY_WARN_THRESHOLD);
        assert_eq!(r.warnings, vec![0]);
    }

    #[test]
    fn jittered_mesh_stays_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-3;
        let mut mesh =
            voxels_to_hexmesh(&VoxelVolume::uniform([4, 4, 4], [h; 3], 1), &BoundaryPolicy::default()).unwrap();
        for p in mesh.nodes_mut() {
            for v in p.iter_mut() {
                *v += rng.gen_range(-0.1..0.1) * h;
            }
        }
        let r = quality_report(&mesh).unwrap();
        assert!(r.min > 0.0 && r.max <= 1.0 && r.min < 1.0);
        assert!(r.min <= r.average && r.average <= r.max);
    }
}
