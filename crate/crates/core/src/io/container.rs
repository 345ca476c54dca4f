//! The MIPS container: a stack of same-sized images sharing one angular plan.
//!
//! Layout, little-endian:
//!
//! | bytes | field |
//! |---|---|
//! | 4 | magic `MIPS` |
//! | 2 | version (1) |
//! | 1 | kind: 0 intensity, 1 label, 2 provenance |
//! | 2 | number of angles |
//! | 4 | rows |
//! | 4 | cols |
//! | 1 | dtype: 0 f32, 1 u8, 2 three i32 per pixel |
//! | 8·n | angles in degrees (f64) |
//! | … | images in angle order, row-major |
//!
//! Provenance triples are `(x, y, z)` with `(-1, -1, -1)` out of field.

use std::path::Path;

use crate::error::{Error, Result};
use crate::projection::{AngularPlan, MipImage, MipKind, MipStack, ProvenanceMap, VoxelTriple};

const MAGIC: &[u8; 4] = b"MIPS";
pub const VERSION: u16 = 1;
const FIXED_HEADER: usize = 18;

const KIND_INTENSITY: u8 = 0;
const KIND_LABEL: u8 = 1;
const KIND_PROVENANCE: u8 = 2;

const DTYPE_F32: u8 = 0;
const DTYPE_U8: u8 = 1;
const DTYPE_TRIPLE: u8 = 2;

/// Provenance maps of one stack.
#[derive(Debug, Clone, PartialEq)]
pub struct ProvenanceStack {
    pub plan: AngularPlan,
    pub maps: Vec<ProvenanceMap>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MipContainer {
    Stack(MipStack),
    Provenance(ProvenanceStack),
}

fn header(kind: u8, dtype: u8, plan: &AngularPlan, rows: usize, cols: usize, payload: usize) -> Result<Vec<u8>> {
    let n = u16::try_from(plan.n()).map_err(|_| Error::invalid("more than 65535 angles"))?;
    let rows32 = u32::try_from(rows).map_err(|_| Error::invalid("rows exceed u32"))?;
    let cols32 = u32::try_from(cols).map_err(|_| Error::invalid("cols exceed u32"))?;
    let mut b = Vec::with_capacity(FIXED_HEADER + 8 * plan.n() + payload);
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    b.push(kind);
    b.extend_from_slice(&n.to_le_bytes());
    b.extend_from_slice(&rows32.to_le_bytes());
    b.extend_from_slice(&cols32.to_le_bytes());
    b.push(dtype);
    for a in plan.angles() {
        b.extend_from_slice(&a.to_le_bytes());
    }
    Ok(b)
}

/// Serializes the images of `stack`; intensity as f32, labels as u8.
pub fn encode_stack(stack: &MipStack) -> Result<Vec<u8>> {
    let px = stack.rows() * stack.cols();
    let (kind, dtype, size) = match stack.kind() {
        MipKind::Intensity => (KIND_INTENSITY, DTYPE_F32, 4),
        MipKind::Label => (KIND_LABEL, DTYPE_U8, 1),
    };
    let mut b = header(kind, dtype, &stack.plan, stack.rows(), stack.cols(), px * stack.plan.n() * size)?;
    for img in &stack.images {
        match stack.kind() {
            MipKind::Intensity => {
                for v in &img.data {
                    b.extend_from_slice(&v.to_le_bytes());
                }
            }
            MipKind::Label => {
                for &v in &img.data {
                    if v != 0.0 && v != 1.0 {
                        return Err(Error::invalid(format!("label image holds non-binary value {v}")));
                    }
                    b.push(v as u8);
                }
            }
        }
    }
    Ok(b)
}

pub fn encode_provenance(plan: &AngularPlan, maps: &[ProvenanceMap]) -> Result<Vec<u8>> {
    if maps.len() != plan.n() {
        return Err(Error::invalid(format!("{} provenance maps for a {}-angle plan", maps.len(), plan.n())));
    }
    let (rows, cols) = (maps[0].rows, maps[0].cols);
    if maps.iter().any(|m| m.rows != rows || m.cols != cols) {
        return Err(Error::GeometryMismatch("provenance maps differ in size".into()));
    }
    let mut b = header(KIND_PROVENANCE, DTYPE_TRIPLE, plan, rows, cols, rows * cols * plan.n() * 12)?;
    for m in maps {
        for t in &m.data {
            for c in t {
                b.extend_from_slice(&c.to_le_bytes());
            }
        }
    }
    Ok(b)
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize, field: &str) -> Result<&'a [u8]> {
    let s = bytes
        .get(*pos..*pos + n)
        .ok_or_else(|| Error::parse(field, "file ends inside the header"))?;
    *pos += n;
    Ok(s)
}

pub fn decode(bytes: &[u8]) -> Result<MipContainer> {
    let mut pos = 0;
    if take(bytes, &mut pos, 4, "magic")? != MAGIC {
        return Err(Error::parse("magic", "not a MIPS container"));
    }
    let version = u16::from_le_bytes(take(bytes, &mut pos, 2, "version")?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let kind = take(bytes, &mut pos, 1, "kind")?[0];
    let n = u16::from_le_bytes(take(bytes, &mut pos, 2, "n_angles")?.try_into().expect("2 bytes")) as usize;
    let rows = u32::from_le_bytes(take(bytes, &mut pos, 4, "rows")?.try_into().expect("4 bytes")) as usize;
    let cols = u32::from_le_bytes(take(bytes, &mut pos, 4, "cols")?.try_into().expect("4 bytes")) as usize;
    let dtype = take(bytes, &mut pos, 1, "dtype")?[0];
    let size = match (kind, dtype) {
        (KIND_INTENSITY, DTYPE_F32) => 4,
        (KIND_LABEL, DTYPE_U8) => 1,
        (KIND_PROVENANCE, DTYPE_TRIPLE) => 12,
        (KIND_INTENSITY | KIND_LABEL | KIND_PROVENANCE, d) => {
            return Err(Error::parse("dtype", format!("dtype {d} is not valid for kind {kind}")))
        }
        (k, _) => return Err(Error::parse("kind", format!("unknown kind {k}"))),
    };
    if n == 0 {
        return Err(Error::parse("n_angles", "container holds no angles"));
    }
    let angles: Vec<f64> = take(bytes, &mut pos, 8 * n, "angles")?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let plan = AngularPlan::from_angles(&angles).map_err(|e| Error::parse("angles", e.to_string()))?;

    let px = rows * cols;
    let expected = (n as u64) * (px as u64) * size as u64;
    let found = (bytes.len() - pos) as u64;
    if expected != found {
        return Err(Error::LengthMismatch { expected, found });
    }
    let payload = &bytes[pos..];
    let image_bytes = px * size;

    if kind == KIND_PROVENANCE {
        let maps = payload
            .chunks_exact(image_bytes.max(1))
            .take(n)
            .map(|img| {
                let data: Vec<VoxelTriple> = img
                    .chunks_exact(12)
                    .map(|t| {
                        std::array::from_fn(|i| i32::from_le_bytes(t[4 * i..4 * i + 4].try_into().expect("4 bytes")))
                    })
                    .collect();
                ProvenanceMap::new(rows, cols, data)
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok(MipContainer::Provenance(ProvenanceStack { plan, maps }));
    }

    let mip_kind = if kind == KIND_LABEL { MipKind::Label } else { MipKind::Intensity };
    let images = (0..n)
        .map(|k| {
            let img = &payload[k * image_bytes..(k + 1) * image_bytes];
            let data: Vec<f32> = match mip_kind {
                MipKind::Intensity => img
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect(),
                MipKind::Label => img.iter().map(|&b| b as f32).collect(),
            };
            MipImage::new(rows, cols, data, plan.angles()[k], mip_kind)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MipContainer::Stack(MipStack::new(plan, images, None)?))
}

pub fn read_container(path: impl AsRef<Path>) -> Result<MipContainer> {
    decode(&super::read_bytes(path.as_ref())?)
}

/// Reads an intensity or label stack.
pub fn read_stack(path: impl AsRef<Path>) -> Result<MipStack> {
    match read_container(path.as_ref())? {
        MipContainer::Stack(s) => Ok(s),
        MipContainer::Provenance(_) => Err(Error::parse(
            "kind",
            format!("{} holds provenance, not images", path.as_ref().display()),
        )),
    }
}

pub fn read_provenance(path: impl AsRef<Path>) -> Result<ProvenanceStack> {
    match read_container(path.as_ref())? {
        MipContainer::Provenance(p) => Ok(p),
        MipContainer::Stack(_) => Err(Error::parse(
            "kind",
            format!("{} holds images, not provenance", path.as_ref().display()),
        )),
    }
}

pub fn write_stack(stack: &MipStack, path: impl AsRef<Path>) -> Result<()> {
    super::write_bytes(path.as_ref(), &encode_stack(stack)?)
}

pub fn write_provenance(plan: &AngularPlan, maps: &[ProvenanceMap], path: impl AsRef<Path>) -> Result<()> {
    super::write_bytes(path.as_ref(), &encode_provenance(plan, maps)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::OUT_OF_FIELD;

    fn tiny() -> MipStack {
        let plan = AngularPlan::new(1).unwrap();
        let img = MipImage::new(2, 2, vec![1.5, -2.0, 0.0, 3.25], 0.0, MipKind::Intensity).unwrap();
        MipStack::new(plan, vec![img], None).unwrap()
    }

    #[test]
    fn intensity_roundtrip_and_layout() {
        let s = tiny();
        let b = encode_stack(&s).unwrap();
        assert_eq!(&b[..4], b"MIPS");
        assert_eq!(b.len(), 18 + 8 + 16);
        assert_eq!(b[6], 0);
        assert_eq!(b[17], 0);
        assert_eq!(decode(&b).unwrap(), MipContainer::Stack(s));
    }

    #[test]
    fn label_roundtrip() {
        let plan = AngularPlan::new(2).unwrap();
        let imgs = plan
            .angles()
            .iter()
            .map(|&a| MipImage::new(1, 3, vec![0.0, 1.0, 1.0], a, MipKind::Label).unwrap())
            .collect();
        let s = MipStack::new(plan, imgs, None).unwrap();
        let b = encode_stack(&s).unwrap();
        assert_eq!(b.len(), 18 + 16 + 6);
        assert_eq!(decode(&b).unwrap(), MipContainer::Stack(s));
    }

    #[test]
    fn provenance_keeps_sentinels() {
        let plan = AngularPlan::new(1).unwrap();
        let m = ProvenanceMap::new(1, 2, vec![[3, 4, 5], OUT_OF_FIELD]).unwrap();
        let b = encode_provenance(&plan, std::slice::from_ref(&m)).unwrap();
        match decode(&b).unwrap() {
            MipContainer::Provenance(p) => assert_eq!(p.maps, vec![m]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn corrupted_files() {
        let mut b = encode_stack(&tiny()).unwrap();
        b.pop();
        assert!(matches!(decode(&b), Err(Error::LengthMismatch { expected: 16, found: 15 })));
        let mut b = encode_stack(&tiny()).unwrap();
        b[4] = 2;
        assert!(matches!(decode(&b), Err(Error::VersionMismatch { found: 2, expected: 1 })));
        let mut b = encode_stack(&tiny()).unwrap();
        b[17] = 1;
        assert!(matches!(decode(&b), Err(Error::Parse { .. })));
        assert!(matches!(decode(b"MIP"), Err(Error::Parse { .. })));
    }
}
