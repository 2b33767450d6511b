//! SHEX1 mesh and SVOX1 voxel text formats.
//!
//! SHEX1:
//! ```text
//! SHEX1 <n_nodes> <n_elems> <n_facesets>
//! <id> <x> <y> <z>                      (n_nodes lines, %.17g)
//! <id> <n1> .. <n8> <material_id>       (n_elems lines)
//! FACESET <name> <count>                (n_facesets blocks)
//! <elem> <localface 0..5>               (count lines)
//! ```
//!
//! SVOX1: header `SVOX1 nx ny nz sx sy sz`, then nx·ny·nz values in
//! x-fastest order, whitespace separated.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{FaceRef, HexElement, HexMesh, MeshError, Point3};
use crate::numfmt::g17;

pub fn write_shex<W: Write>(mesh: &HexMesh, mut out: W) -> std::io::Result<()> {
    writeln!(out, "SHEX1 {} {} {}", mesh.nodes().len(), mesh.n_elements(), mesh.face_sets().len())?;
    for (i, p) in mesh.nodes().iter().enumerate() {
        writeln!(out, "{} {} {} {}", i, g17(p[0]), g17(p[1]), g17(p[2]))?;
    }
    for (e, el) in mesh.elements().iter().enumerate() {
        write!(out, "{}", e)?;
        for c in el.corners {
            write!(out, " {}", c)?;
        }
        writeln!(out, " {}", el.material)?;
    }
    for (name, faces) in mesh.face_sets() {
        writeln!(out, "FACESET {} {}", name, faces.len())?;
        for f in faces {
            writeln!(out, "{} {}", f.element, f.face)?;
        }
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    /// Next non-blank line, split into tokens.
    fn next_tokens(&mut self) -> Result<Option<Vec<String>>, MeshError> {
        for l in self.inner.by_ref() {
            self.line += 1;
            let l = l?;
            let t: Vec<String> = l.split_whitespace().map(str::to_string).collect();
            if !t.is_empty() {
                return Ok(Some(t));
            }
        }
        Ok(None)
    }

    fn expect_tokens(&mut self, what: &str) -> Result<Vec<String>, MeshError> {
        self.next_tokens()?.ok_or_else(|| self.err(format!("unexpected end of file, expected {what}")))
    }

    fn err(&self, message: String) -> MeshError {
        MeshError::Parse { line: self.line, message }
    }

    fn num<T: std::str::FromStr>(&self, tok: &str, what: &str) -> Result<T, MeshError> {
        tok.parse().map_err(|_| self.err(format!("invalid {what} '{tok}'")))
    }
}

pub fn read_shex<R: BufRead>(input: R) -> Result<HexMesh, MeshError> {
    let mut lines = Lines { inner: input.lines(), line: 0 };
    let header = lines.expect_tokens("header")?;
    if header.len() != 4 || header[0] != "SHEX1" {
        return Err(lines.err("expected header 'SHEX1 <n_nodes> <n_elems> <n_facesets>'".into()));
    }
    let n_nodes: usize = lines.num(&header[1], "node count")?;
    let n_elems: usize = lines.num(&header[2], "element count")?;
    let n_sets: usize = lines.num(&header[3], "face set count")?;

    let mut nodes: Vec<Point3> = Vec::with_capacity(n_nodes);
    for i in 0..n_nodes {
        let t = lines.expect_tokens("node line")?;
        if t.len() != 4 {
            return Err(lines.err("node line needs '<id> <x> <y> <z>'".into()));
        }
        let id: usize = lines.num(&t[0], "node id")?;
        if id != i {
            return Err(lines.err(format!("node ids must be sequential from 0, got {id} expected {i}")));
        }
        nodes.push([lines.num(&t[1], "x")?, lines.num(&t[2], "y")?, lines.num(&t[3], "z")?]);
    }
    let mut elements = Vec::with_capacity(n_elems);
    for e in 0..n_elems {
        let t = lines.expect_tokens("element line")?;
        if t.len() != 10 {
            return Err(lines.err("element line needs '<id> <n1..n8> <material_id>'".into()));
        }
        let id: usize = lines.num(&t[0], "element id")?;
        if id != e {
            return Err(lines.err(format!("element ids must be sequential from 0, got {id} expected {e}")));
        }
        let mut corners = [0usize; 8];
        for (k, c) in corners.iter_mut().enumerate() {
            *c = lines.num(&t[1 + k], "node reference")?;
        }
        elements.push(HexElement { corners, material: lines.num(&t[9], "material id")? });
    }
    let mut sets: BTreeMap<String, Vec<FaceRef>> = BTreeMap::new();
    for _ in 0..n_sets {
        let t = lines.expect_tokens("FACESET block")?;
        if t.len() != 3 || t[0] != "FACESET" {
            return Err(lines.err("expected 'FACESET <name> <count>'".into()));
        }
        let count: usize = lines.num(&t[2], "face count")?;
        let set = sets.entry(t[1].clone()).or_default();
        for _ in 0..count {
            let f = lines.expect_tokens("face line")?;
            if f.len() != 2 {
                return Err(lines.err("face line needs '<elem> <localface>'".into()));
            }
            let face: u8 = lines.num(&f[1], "local face")?;
            if face > 5 {
                return Err(lines.err(format!("local face {face} out of range 0..5")));
            }
            set.push(FaceRef { element: lines.num(&f[0], "element")?, face });
        }
    }
    if let Some(extra) = lines.next_tokens()? {
        return Err(lines.err(format!("trailing content '{}'", extra.join(" "))));
    }
    HexMesh::new(nodes, elements, sets)
}

/// Raw SVOX1 content: grid shape, spacing and one value per voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct SvoxData {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub values: Vec<f64>,
}

pub fn read_svox<R: BufRead>(input: R) -> Result<SvoxData, MeshError> {
    let mut lines = Lines { inner: input.lines(), line: 0 };
    let header = lines.expect_tokens("header")?;
    if header.len() != 7 || header[0] != "SVOX1" {
        return Err(lines.err("expected header 'SVOX1 nx ny nz sx sy sz'".into()));
    }
    let mut dims = [0usize; 3];
    let mut spacing = [0.0f64; 3];
    for a in 0..3 {
        dims[a] = lines.num(&header[1 + a], "voxel count")?;
        spacing[a] = lines.num(&header[4 + a], "voxel spacing")?;
    }
    let expected = dims.iter().product::<usize>();
    let mut values = Vec::with_capacity(expected);
    while let Some(t) = lines.next_tokens()? {
        for tok in &t {
            values.push(lines.num::<f64>(tok, "voxel value")?);
        }
    }
    if values.len() != expected {
        return Err(MeshError::VoxelCount { expected, got: values.len() });
    }
    Ok(SvoxData { dims, spacing, values })
}

pub fn write_svox<W: Write>(data: &SvoxData, mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "SVOX1 {} {} {} {} {} {}",
        data.dims[0],
        data.dims[1],
        data.dims[2],
        g17(data.spacing[0]),
        g17(data.spacing[1]),
        g17(data.spacing[2])
    )?;
    for row in data.values.chunks(data.dims[0].max(1)) {
        let line: Vec<String> = row.iter().map(|v| g17(*v)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{voxels_to_hexmesh, BoundaryKind, BoundaryPolicy, VoxelVolume};

    #[test]
    fn shex_round_trip() {
        let mut vol = VoxelVolume::uniform([2, 1, 3], [0.1, 0.25, 1.0 / 3.0], 5);
        vol.materials[3] = 4;
        let mut policy = BoundaryPolicy::all(BoundaryKind::Absorbing);
        policy.sides[5] = BoundaryKind::Free;
        let mesh = voxels_to_hexmesh(&vol, &policy).unwrap();
        let mut buf = Vec::new();
        write_shex(&mesh, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("SHEX1 24 6 2\n0 0 0 0\n1 0.10000000000000001 0 0\n"));
        assert!(text.contains("FACESET free 2\n"));
        let back = read_shex(buf.as_slice()).unwrap();
        assert_eq!(back, mesh);
    }

    #[test]
    fn shex_errors_name_the_line() {
        let bad = "SHEX1 1 0 0\n0 1.0 2.0\n";
        match read_shex(bad.as_bytes()) {
            Err(MeshError::Parse { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_shex("HEX 1 0 0\n".as_bytes()).is_err());
    }

    #[test]
    fn svox_parse() {
        let text = "SVOX1 2 1 2 0.001 0.001 0.002\n5 5\n4 5\n";
        let d = read_svox(text.as_bytes()).unwrap();
        assert_eq!(d.dims, [2, 1, 2]);
        assert_eq!(d.spacing, [0.001, 0.001, 0.002]);
        assert_eq!(d.values, vec![5.0, 5.0, 4.0, 5.0]);
        let mut buf = Vec::new();
        write_svox(&d, &mut buf).unwrap();
        assert_eq!(read_svox(buf.as_slice()).unwrap(), d);
        assert!(matches!(
            read_svox("SVOX1 2 1 1 1 1 1\n5\n".as_bytes()),
            Err(MeshError::VoxelCount { expected: 2, got: 1 })
        ));
    }
}
