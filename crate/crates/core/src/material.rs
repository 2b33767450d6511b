//! Tissue properties, the built-in dolphin-head table, Hounsfield-unit
//! classification and the SMAT1 text format.
//!
//! SMAT1 lines: `<material_id> <name> <rho> <vp> <vs> [hu_min hu_max]`.
//! `#` starts a comment. Open HU bounds are written as `-inf` / `inf`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::mesh::{SvoxData, VoxelVolume};
use crate::numfmt::g17;

#[derive(Debug, Error)]
pub enum MaterialError {
    #[error("material '{name}': {reason}")]
    InvalidProperty { name: String, reason: String },
    #[error("material id {0} is defined twice")]
    DuplicateId(u32),
    #[error("material id {0} is not defined")]
    UnknownMaterial(u32),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("voxel {voxel}: HU {hu} matches no material range (use --hu-snap for nearest-range assignment)")]
    Unclassified { voxel: usize, hu: f64 },
    #[error("voxel {voxel}: HU {hu} is ambiguous between {candidates:?}")]
    Ambiguous { voxel: usize, hu: f64, candidates: Vec<String> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which wave equation governs an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainKind {
    Acoustic,
    Elastic,
}

/// Homogeneous isotropic lossless material.
#[derive(Debug, Clone, PartialEq)]
pub struct TissueProperties {
    pub name: String,
    /// Inclusive HU range; either bound may be infinite.
    pub hu_range: Option<(f64, f64)>,
    /// Density, kg/m³.
    pub rho: f64,
    /// Compressional velocity, m/s.
    pub vp: f64,
    /// Shear velocity, m/s; zero for fluids.
    pub vs: f64,
}

impl TissueProperties {
    /// Validates rho > 0, vp > 0, 0 ≤ vs < vp and a well-ordered HU range.
    pub fn new(
        name: &str,
        rho: f64,
        vp: f64,
        vs: f64,
        hu_range: Option<(f64, f64)>,
    ) -> Result<Self, MaterialError> {
        let bad = |reason: String| MaterialError::InvalidProperty { name: name.to_string(), reason };
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(bad("name must be non-empty without whitespace".into()));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(bad(format!("density must be positive, got {rho}")));
        }
        if !(vp > 0.0 && vp.is_finite()) {
            return Err(bad(format!("vp must be positive, got {vp}")));
        }
        if !(vs >= 0.0 && vs.is_finite()) {
            return Err(bad(format!("vs must be non-negative, got {vs}")));
        }
        if vs >= vp {
            return Err(bad(format!("vs ({vs}) must be below vp ({vp})")));
        }
        if let Some((lo, hi)) = hu_range {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(bad(format!("invalid HU range [{lo}, {hi}]")));
            }
        }
        Ok(TissueProperties { name: name.to_string(), hu_range, rho, vp, vs })
    }

    pub fn domain_kind(&self) -> DomainKind {
        if self.vs == 0.0 {
            DomainKind::Acoustic
        } else {
            DomainKind::Elastic
        }
    }

    /// Acoustic impedance ρ·vp.
    pub fn impedance(&self) -> f64 {
        self.rho * self.vp
    }

    /// Lamé parameters (λ, μ); λ < 0 is rejected.
    pub fn lame(&self) -> Result<(f64, f64), MaterialError> {
        let mu = self.rho * self.vs * self.vs;
        let lambda = self.rho * (self.vp * self.vp - 2.0 * self.vs * self.vs);
        if lambda < 0.0 {
            return Err(MaterialError::InvalidProperty {
                name: self.name.clone(),
                reason: format!("negative Lamé λ = {lambda} (vp² < 2 vs²)"),
            });
        }
        Ok((lambda, mu))
    }

    pub fn contains_hu(&self, hu: f64) -> bool {
        matches!(self.hu_range, Some((lo, hi)) if hu >= lo && hu <= hi)
    }

    /// Distance from `hu` to the HU range; infinite without a range.
    fn hu_distance(&self, hu: f64) -> f64 {
        match self.hu_range {
            Some((lo, _)) if hu < lo => lo - hu,
            Some((_, hi)) if hu > hi => hu - hi,
            Some(_) => 0.0,
            None => f64::INFINITY,
        }
    }
}

/// Materials keyed by id, iterated in ascending id order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MaterialTable {
    entries: BTreeMap<u32, TissueProperties>,
}

pub const BONE_ID: u32 = 4;
pub const WATER_ID: u32 = 5;

/// The five tissues of the dolphin-head model.
pub fn builtin_dolphin_table() -> MaterialTable {
    let rows: [(u32, &str, f64, f64, f64, f64, f64); 5] = [
        (1, "soft_tissue", 1013.0, 1536.0, 215.0, -35.0, 110.0),
        (2, "acoustic_fat", 928.0, 1390.0, 186.0, -115.0, -35.0),
        (3, "melon", 884.0, 1316.0, 184.0, -115.0, -35.0),
        (BONE_ID, "bone", 2035.0, 3400.0, 1817.0, 235.0, 2030.0),
        (WATER_ID, "water", 1028.0, 1480.0, 0.0, f64::NEG_INFINITY, -2000.0),
    ];
    let mut t = MaterialTable::default();
    for (id, name, rho, vp, vs, lo, hi) in rows {
        let p = TissueProperties::new(name, rho, vp, vs, Some((lo, hi))).expect("builtin row is valid");
        t.insert(id, p).expect("builtin ids are unique");
    }
    t
}

impl MaterialTable {
    pub fn insert(&mut self, id: u32, props: TissueProperties) -> Result<(), MaterialError> {
        if self.entries.contains_key(&id) {
            return Err(MaterialError::DuplicateId(id));
        }
        self.entries.insert(id, props);
        Ok(())
    }

    pub fn get(&self, id: u32) -> Result<&TissueProperties, MaterialError> {
        self.entries.get(&id).ok_or(MaterialError::UnknownMaterial(id))
    }

    pub fn by_name(&self, name: &str) -> Option<(u32, &TissueProperties)> {
        self.entries.iter().find(|(_, p)| p.name == name).map(|(&id, p)| (id, p))
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &TissueProperties)> {
        self.entries.iter().map(|(&id, p)| (id, p))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All materials whose HU range contains `hu`, in id order. Empty means
    /// unclassified; several candidates mean the value is ambiguous.
    pub fn classify_hu(&self, hu: f64) -> Vec<(u32, &TissueProperties)> {
        self.iter().filter(|(_, p)| p.contains_hu(hu)).collect()
    }

    /// Materials with the HU range nearest to `hu` (all ties, id order).
    pub fn nearest_hu(&self, hu: f64) -> Vec<(u32, &TissueProperties)> {
        let best = self.iter().map(|(_, p)| p.hu_distance(hu)).fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            return Vec::new();
        }
        self.iter().filter(|(_, p)| p.hu_distance(hu) == best).collect()
    }

    /// Maps an HU voxel grid to material ids. Gap values are an error unless
    /// `hu_snap` is set; values matching several tissues are always an error.
    pub fn classify_voxels(&self, data: &SvoxData, hu_snap: bool) -> Result<VoxelVolume, MaterialError> {
        let mut materials = Vec::with_capacity(data.values.len());
        for (voxel, &hu) in data.values.iter().enumerate() {
            let mut c = self.classify_hu(hu);
            if c.is_empty() {
                if !hu_snap {
                    return Err(MaterialError::Unclassified { voxel, hu });
                }
                c = self.nearest_hu(hu);
                if c.is_empty() {
                    return Err(MaterialError::Unclassified { voxel, hu });
                }
            }
            if c.len() > 1 {
                return Err(MaterialError::Ambiguous {
                    voxel,
                    hu,
                    candidates: c.iter().map(|(_, p)| p.name.clone()).collect(),
                });
            }
            materials.push(c[0].0);
        }
        Ok(VoxelVolume { dims: data.dims, spacing: data.spacing, origin: [0.0; 3], materials })
    }
}

pub fn write_smat<W: Write>(table: &MaterialTable, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# SMAT1")?;
    writeln!(out, "# id name rho vp vs [hu_min hu_max]")?;
    for (id, p) in table.iter() {
        write!(out, "{} {} {} {} {}", id, p.name, g17(p.rho), g17(p.vp), g17(p.vs))?;
        if let Some((lo, hi)) = p.hu_range {
            write!(out, " {} {}", g17(lo), g17(hi))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_smat<R: BufRead>(input: R) -> Result<MaterialTable, MaterialError> {
    let mut table = MaterialTable::default();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let ln = idx + 1;
        let body = line.split('#').next().unwrap_or("");
        let t: Vec<&str> = body.split_whitespace().collect();
        if t.is_empty() {
            continue;
        }
        let err = |message: String| MaterialError::Parse { line: ln, message };
        if t.len() != 5 && t.len() != 7 {
            return Err(err("expected '<id> <name> <rho> <vp> <vs> [hu_min hu_max]'".into()));
        }
        let num = |s: &str, what: &str| s.parse::<f64>().map_err(|_| err(format!("invalid {what} '{s}'")));
        let id: u32 = t[0].parse().map_err(|_| err(format!("invalid material id '{}'", t[0])))?;
        let hu = if t.len() == 7 { Some((num(t[5], "hu_min")?, num(t[6], "hu_max")?)) } else { None };
        let props = TissueProperties::new(t[1], num(t[2], "rho")?, num(t[3], "vp")?, num(t[4], "vs")?, hu)
            .map_err(|e| err(e.to_string()))?;
        table.insert(id, props).map_err(|e| err(e.to_string()))?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn get<'a>(t: &'a MaterialTable, name: &str) -> &'a TissueProperties {
        t.by_name(name).unwrap().1
    }

    #[test]
    fn builtin_values() {
        let t = builtin_dolphin_table();
        assert_eq!(t.len(), 5);
        let bone = get(&t, "bone");
        assert_eq!((bone.rho, bone.vp, bone.vs), (2035.0, 3400.0, 1817.0));
        let melon = get(&t, "melon");
        assert_eq!((melon.rho, melon.vp, melon.vs), (884.0, 1316.0, 184.0));
        let water = get(&t, "water");
        assert_eq!(water.vs, 0.0);
        assert_eq!(water.domain_kind(), DomainKind::Acoustic);
        assert_eq!(get(&t, "soft_tissue").domain_kind(), DomainKind::Elastic);
        assert_eq!(water.impedance(), 1_521_440.0);
    }

    #[test]
    fn hu_classification() {
        let t = builtin_dolphin_table();
        let names = |hu| t.classify_hu(hu).iter().map(|(_, p)| p.name.clone()).collect::<Vec<_>>();
        assert_eq!(names(1000.0), ["bone"]);
        assert_eq!(names(-50.0), ["acoustic_fat", "melon"]);
        assert!(names(150.0).is_empty());
        assert_eq!(names(-3000.0), ["water"]);
        // Midpoint round trip for finite ranges.
        for (id, p) in t.iter() {
            if let Some((lo, hi)) = p.hu_range {
                if lo.is_finite() && hi.is_finite() {
                    assert!(t.classify_hu(0.5 * (lo + hi)).iter().any(|(i, _)| *i == id));
                }
            }
        }
    }

    #[test]
    fn snapping_and_voxels() {
        let t = builtin_dolphin_table();
        assert_eq!(t.nearest_hu(150.0)[0].1.name, "soft_tissue");
        assert_eq!(t.nearest_hu(200.0)[0].1.name, "bone");
        let data = SvoxData { dims: [3, 1, 1], spacing: [1e-3; 3], values: vec![-3000.0, 0.0, 150.0] };
        assert!(matches!(t.classify_voxels(&data, false), Err(MaterialError::Unclassified { voxel: 2, .. })));
        assert_eq!(t.classify_voxels(&data, true).unwrap().materials, vec![5, 1, 1]);
        let amb = SvoxData { dims: [1, 1, 1], spacing: [1e-3; 3], values: vec![-50.0] };
        assert!(matches!(t.classify_voxels(&amb, true), Err(MaterialError::Ambiguous { .. })));
    }

    #[test]
    fn validation() {
        assert!(TissueProperties::new("x", -1.0, 1500.0, 0.0, None).is_err());
        assert!(TissueProperties::new("x", 1000.0, 1500.0, 1600.0, None).is_err());
        assert!(TissueProperties::new("x", 1000.0, 0.0, 0.0, None).is_err());
        let p = TissueProperties::new("x", 1000.0, 1000.0, 0.0, None).unwrap();
        assert_eq!(p.domain_kind(), DomainKind::Acoustic);
        let q = TissueProperties::new("x", 1000.0, 1000.0, 800.0, None).unwrap();
        assert!(q.lame().is_err());
        let (l, m) = get(&builtin_dolphin_table(), "bone").lame().unwrap();
        assert_eq!(m, 2035.0 * 1817.0 * 1817.0);
        assert_eq!(l, 2035.0 * (3400.0f64 * 3400.0 - 2.0 * 1817.0 * 1817.0));
    }

    #[test]
    fn smat_round_trip() {
        let t = builtin_dolphin_table();
        let mut buf = Vec::new();
        write_smat(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("5 water 1028 1480 0 -inf -2000\n"));
        assert_eq!(read_smat(buf.as_slice()).unwrap(), t);
        assert!(matches!(read_smat("1 a 1000 1500\n".as_bytes()), Err(MaterialError::Parse { line: 1, .. })));
        assert!(read_smat("1 a 1000 1500 0\n1 b 1000 1500 0\n".as_bytes()).is_err());
    }
}
