//! Run manifests and SNAP1 field snapshots.

use std::io::{self, BufRead, Read, Write};

use crate::assembly::FieldVectors;

/// Ordered key-value record written as `key=value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `key`, replacing an earlier value in place.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        debug_assert!(!key.contains('=') && !key.contains('\n') && !value.contains('\n'));
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn extend(&mut self, other: &Manifest) {
        for (k, v) in &other.entries {
            self.set(k, v);
        }
    }

    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(w, "{k}={v}")?;
        }
        w.flush()
    }

    pub fn read<R: BufRead>(r: R) -> io::Result<Manifest> {
        let mut m = Manifest::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                io::Error::new(io::ErrorKind::InvalidData, format!("line {}: expected key=value", i + 1))
            })?;
            m.set(k, v);
        }
        Ok(m)
    }
}

pub const SNAP_MAGIC: &[u8; 8] = b"SNAP1\0\0\0";

/// Writes header (magic, step u64, time f64, n_fluid u64, n_solid_nodes u64)
/// and the arrays φ, φ̇, u, u̇, all little-endian.
pub fn write_snapshot<W: Write>(mut w: W, step: u64, time: f64, state: &FieldVectors) -> io::Result<()> {
    w.write_all(SNAP_MAGIC)?;
    w.write_all(&step.to_le_bytes())?;
    w.write_all(&time.to_le_bytes())?;
    w.write_all(&(state.phi.len() as u64).to_le_bytes())?;
    w.write_all(&((state.u.len() / 3) as u64).to_le_bytes())?;
    for arr in [&state.phi, &state.phi_dot, &state.u, &state.u_dot] {
        let mut buf = Vec::with_capacity(arr.len() * 8);
        for v in arr.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    pub time: f64,
    pub phi: Vec<f64>,
    pub phi_dot: Vec<f64>,
    pub u: Vec<f64>,
    pub u_dot: Vec<f64>,
}

pub fn read_snapshot<R: Read>(mut r: R) -> io::Result<Snapshot> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SNAP_MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "not a SNAP1 file"));
    }
    let mut word = [0u8; 8];
    let mut next = |r: &mut R| -> io::Result<[u8; 8]> {
        r.read_exact(&mut word)?;
        Ok(word)
    };
    let step = u64::from_le_bytes(next(&mut r)?);
    let time = f64::from_le_bytes(next(&mut r)?);
    let nf = u64::from_le_bytes(next(&mut r)?) as usize;
    let ns = 3 * u64::from_le_bytes(next(&mut r)?) as usize;
    let mut array = |n: usize| -> io::Result<Vec<f64>> {
        let mut buf = vec![0u8; n * 8];
        r.read_exact(&mut buf)?;
        Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    };
    Ok(Snapshot { step, time, phi: array(nf)?, phi_dot: array(nf)?, u: array(ns)?, u_dot: array(ns)? })
}
