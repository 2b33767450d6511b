//! Trilinear reference-to-physical map of hex-8 elements evaluated at GLL points.

use super::{HexMesh, MeshError, Point3, CORNER_SIGNS};
use crate::gll::GllRule;

/// x(ξ) = Σ_c N_c(ξ) x_c with N_c = Π (1 + s_c ξ)/2.
pub fn trilinear_point(corners: &[Point3; 8], xi: [f64; 3]) -> Point3 {
    let mut x = [0.0; 3];
    for (c, s) in corners.iter().zip(CORNER_SIGNS.iter()) {
        let n = 0.125 * (1.0 + s[0] * xi[0]) * (1.0 + s[1] * xi[1]) * (1.0 + s[2] * xi[2]);
        for a in 0..3 {
            x[a] += n * c[a];
        }
    }
    x
}

/// J[a][r] = ∂x_a/∂ξ_r of the trilinear map.
pub fn trilinear_jacobian(corners: &[Point3; 8], xi: [f64; 3]) -> [[f64; 3]; 3] {
    let mut j = [[0.0; 3]; 3];
    for (c, s) in corners.iter().zip(CORNER_SIGNS.iter()) {
        let f = [1.0 + s[0] * xi[0], 1.0 + s[1] * xi[1], 1.0 + s[2] * xi[2]];
        let dn = [0.125 * s[0] * f[1] * f[2], 0.125 * f[0] * s[1] * f[2], 0.125 * f[0] * f[1] * s[2]];
        for a in 0..3 {
            for r in 0..3 {
                j[a][r] += dn[r] * c[a];
            }
        }
    }
    j
}

pub(crate) fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub(crate) fn inv3(m: &[[f64; 3]; 3], det: f64) -> [[f64; 3]; 3] {
    let id = 1.0 / det;
    [
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * id,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * id,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * id,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * id,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * id,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * id,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * id,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * id,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * id,
        ],
    ]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Newton inversion of the trilinear map. Returns the (unclamped) reference
/// coordinates of `x`, or `None` if the iteration fails to converge.
pub fn invert_trilinear(corners: &[Point3; 8], x: Point3, tol: f64) -> Option<[f64; 3]> {
    let mut xi = [0.0; 3];
    for _ in 0..60 {
        let p = trilinear_point(corners, xi);
        let r = [x[0] - p[0], x[1] - p[1], x[2] - p[2]];
        let j = trilinear_jacobian(corners, xi);
        let det = det3(&j);
        if !(det.abs() > 0.0) || !det.is_finite() {
            return None;
        }
        let inv = inv3(&j, det);
        let mut step = [0.0; 3];
        for rr in 0..3 {
            step[rr] = inv[rr][0] * r[0] + inv[rr][1] * r[1] + inv[rr][2] * r[2];
        }
        for rr in 0..3 {
            xi[rr] += step[rr];
        }
        if xi.iter().any(|v| v.abs() > 10.0) {
            return None;
        }
        if step.iter().all(|s| s.abs() < tol) {
            return Some(xi);
        }
    }
    None
}

/// Geometric data of a local face at its (N+1)² GLL points.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceGeometry {
    /// Volume-local indices of the face points (first in-face axis fastest).
    pub local_points: Vec<usize>,
    /// Products of the two 1D GLL weights.
    pub weights: Vec<f64>,
    /// Outward unit normals.
    pub normals: Vec<[f64; 3]>,
    /// Surface Jacobian (area per reference area).
    pub surface_jacobian: Vec<f64>,
}

/// Jacobians of one element at its (N+1)³ GLL points, local index
/// i + n(j + n k) with i along ξ.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementGeometry {
    pub n_points_1d: usize,
    pub points: Vec<Point3>,
    /// J[a][r] = ∂x_a/∂ξ_r.
    pub jacobian: Vec<[[f64; 3]; 3]>,
    pub det: Vec<f64>,
    /// J⁻¹[r][a] = ∂ξ_r/∂x_a.
    pub inverse: Vec<[[f64; 3]; 3]>,
    pub faces: Vec<FaceGeometry>,
}

impl ElementGeometry {
    pub fn local_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n_points_1d * (j + self.n_points_1d * k)
    }
}

/// Volume-local indices of the GLL points on local face `face`.
pub(crate) fn face_local_points(n: usize, face: usize) -> Vec<usize> {
    let axis = face / 2;
    let fixed = if face % 2 == 0 { 0 } else { n - 1 };
    let (a, b) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let mut out = Vec::with_capacity(n * n);
    for ib in 0..n {
        for ia in 0..n {
            let mut idx = [0usize; 3];
            idx[axis] = fixed;
            idx[a] = ia;
            idx[b] = ib;
            out.push(idx[0] + n * (idx[1] + n * idx[2]));
        }
    }
    out
}

/// Area vector ∂x/∂ξ_a × ∂x/∂ξ_b pointing toward increasing ξ_axis.
fn area_vector(j: &[[f64; 3]; 3], axis: usize) -> [f64; 3] {
    let col = |r: usize| [j[0][r], j[1][r], j[2][r]];
    match axis {
        0 => cross(col(1), col(2)),
        1 => cross(col(2), col(0)),
        _ => cross(col(0), col(1)),
    }
}

pub fn element_geometry(mesh: &HexMesh, elem: usize, rule: &GllRule) -> Result<ElementGeometry, MeshError> {
    if elem >= mesh.n_elements() {
        return Err(MeshError::InvalidElement { element: elem, reason: "no such element".into() });
    }
    let corners = mesh.corner_coords(elem);
    let n = rule.len();
    let x = rule.nodes();
    let w = rule.weights();
    let np = n * n * n;
    let mut points = Vec::with_capacity(np);
    let mut jacobian = Vec::with_capacity(np);
    let mut det = Vec::with_capacity(np);
    let mut inverse = Vec::with_capacity(np);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let xi = [x[i], x[j], x[k]];
                let jm = trilinear_jacobian(&corners, xi);
                let d = det3(&jm);
                if !(d > 0.0) {
                    return Err(MeshError::InvertedElement { element: elem, det: d });
                }
                points.push(trilinear_point(&corners, xi));
                inverse.push(inv3(&jm, d));
                jacobian.push(jm);
                det.push(d);
            }
        }
    }
    let faces = (0..6)
        .map(|f| {
            let local_points = face_local_points(n, f);
            let axis = f / 2;
            let sign = if f % 2 == 0 { -1.0 } else { 1.0 };
            let mut weights = Vec::with_capacity(n * n);
            let mut normals = Vec::with_capacity(n * n);
            let mut surface_jacobian = Vec::with_capacity(n * n);
            for (q, &l) in local_points.iter().enumerate() {
                let (ia, ib) = (q % n, q / n);
                weights.push(w[ia] * w[ib]);
                let av = area_vector(&jacobian[l], axis);
                let s = norm(av);
                surface_jacobian.push(s);
                normals.push([sign * av[0] / s, sign * av[1] / s, sign * av[2] / s]);
            }
            FaceGeometry { local_points, weights, normals, surface_jacobian }
        })
        .collect();
    Ok(ElementGeometry { n_points_1d: n, points, jacobian, det, inverse, faces })
}

/// Smallest distance between adjacent GLL points of one element.
pub fn element_min_gll_spacing(mesh: &HexMesh, elem: usize, rule: &GllRule) -> f64 {
    let corners = mesh.corner_coords(elem);
    let n = rule.len();
    let x = rule.nodes();
    let mut pts = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                pts.push(trilinear_point(&corners, [x[i], x[j], x[k]]));
            }
        }
    }
    let idx = |i: usize, j: usize, k: usize| i + n * (j + n * k);
    let dist = |p: Point3, q: Point3| norm([p[0] - q[0], p[1] - q[1], p[2] - q[2]]);
    let mut best = f64::INFINITY;
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let p = pts[idx(i, j, k)];
                if i + 1 < n {
                    best = best.min(dist(p, pts[idx(i + 1, j, k)]));
                }
                if j + 1 < n {
                    best = best.min(dist(p, pts[idx(i, j + 1, k)]));
                }
                if k + 1 < n {
                    best = best.min(dist(p, pts[idx(i, j, k + 1)]));
                }
            }
        }
    }
    best
}

/// Minimum distance between adjacent GLL points over the whole mesh.
pub fn min_gll_spacing(mesh: &HexMesh, rule: &GllRule) -> Result<f64, MeshError> {
    let mut best = f64::INFINITY;
    for e in 0..mesh.n_elements() {
        check_positive_det(mesh, e, rule)?;
        best = best.min(element_min_gll_spacing(mesh, e, rule));
    }
    Ok(best)
}

pub(crate) fn check_positive_det(mesh: &HexMesh, elem: usize, rule: &GllRule) -> Result<(), MeshError> {
    let corners = mesh.corner_coords(elem);
    let x = rule.nodes();
    for &a in x {
        for &b in x {
            for &c in x {
                let d = det3(&trilinear_jacobian(&corners, [a, b, c]));
                if !(d > 0.0) {
                    return Err(MeshError::InvertedElement { element: elem, det: d });
                }
            }
        }
    }
    Ok(())
}
