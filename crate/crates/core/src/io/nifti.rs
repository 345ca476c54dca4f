//! NIfTI-1 single-file reader and writer.
//!
//! Supported: 3D images, `.nii` or gzip-compressed, either byte order, and
//! datatypes u8, i16, u16, f32, f64. The qform/sform matrices are parsed and
//! logged but never applied; axis order is controlled by [`AxisMap`].

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::volume::{Dims, Spacing, Volume3D, VolumeKind};

const HEADER_LEN: usize = 348;
const VOX_OFFSET: usize = 352;

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;
const DT_FLOAT64: i16 = 64;
const DT_UINT16: i16 = 512;

/// The header fields this reader uses.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub little_endian: bool,
    pub dims: [usize; 3],
    pub pixdim: [f32; 3],
    pub datatype: i16,
    pub vox_offset: usize,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub qform_code: i16,
    pub sform_code: i16,
    pub quatern: [f32; 6],
    pub srow: [[f32; 4]; 3],
    pub descrip: String,
}

struct Fields<'a> {
    bytes: &'a [u8],
    le: bool,
}

impl Fields<'_> {
    fn i16(&self, off: usize) -> i16 {
        let b = [self.bytes[off], self.bytes[off + 1]];
        if self.le {
            i16::from_le_bytes(b)
        } else {
            i16::from_be_bytes(b)
        }
    }

    fn i32(&self, off: usize) -> i32 {
        let b: [u8; 4] = self.bytes[off..off + 4].try_into().expect("4 bytes");
        if self.le {
            i32::from_le_bytes(b)
        } else {
            i32::from_be_bytes(b)
        }
    }

    fn f32(&self, off: usize) -> f32 {
        f32::from_bits(self.i32(off) as u32)
    }
}

fn datatype_size(dt: i16) -> Option<usize> {
    match dt {
        DT_UINT8 => Some(1),
        DT_INT16 | DT_UINT16 => Some(2),
        DT_FLOAT32 => Some(4),
        DT_FLOAT64 => Some(8),
        _ => None,
    }
}

impl NiftiHeader {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::parse(
                "header",
                format!("{} bytes is shorter than the {HEADER_LEN}-byte NIfTI-1 header", bytes.len()),
            ));
        }
        let le = match (
            i32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes")),
            i32::from_be_bytes(bytes[0..4].try_into().expect("4 bytes")),
        ) {
            (348, _) => true,
            (_, 348) => false,
            (v, _) => return Err(Error::parse("sizeof_hdr", format!("expected 348, found {v}"))),
        };
        let f = Fields { bytes, le };

        let magic = &bytes[344..348];
        if magic != b"n+1\0" {
            if magic == b"ni1\0" {
                return Err(Error::parse("magic", "split .hdr/.img pairs are not supported"));
            }
            return Err(Error::parse("magic", format!("expected \"n+1\\0\", found {magic:?}")));
        }

        let ndim = f.i16(40);
        if ndim != 3 {
            let extra = (4..=ndim.clamp(0, 7) as usize).all(|i| f.i16(40 + 2 * i) == 1);
            return Err(Error::parse(
                "dim[0]",
                if ndim > 3 && extra {
                    format!("{ndim} dimensions declared; only 3D images are supported")
                } else {
                    format!("only 3D images are supported, found {ndim} dimensions")
                },
            ));
        }
        let mut dims = [0usize; 3];
        for (i, d) in dims.iter_mut().enumerate() {
            let v = f.i16(42 + 2 * i);
            if v < 1 {
                return Err(Error::parse(format!("dim[{}]", i + 1), format!("must be positive, found {v}")));
            }
            *d = v as usize;
        }

        let datatype = f.i16(70);
        let size = datatype_size(datatype)
            .ok_or_else(|| Error::parse("datatype", format!("unsupported datatype code {datatype}")))?;
        let bitpix = f.i16(72);
        if bitpix as usize != size * 8 {
            log::warn!("bitpix {bitpix} disagrees with datatype {datatype}; using the datatype");
        }

        let mut pixdim = [0f32; 3];
        for (i, p) in pixdim.iter_mut().enumerate() {
            *p = f.f32(80 + 4 * i);
            if !(p.is_finite() && *p > 0.0) {
                return Err(Error::parse(format!("pixdim[{}]", i + 1), format!("must be positive, found {p}")));
            }
        }

        let vox = f.f32(108);
        if !(vox.is_finite() && vox >= HEADER_LEN as f32 && vox.fract() == 0.0) {
            return Err(Error::parse("vox_offset", format!("invalid offset {vox}")));
        }

        let mut quatern = [0f32; 6];
        for (i, q) in quatern.iter_mut().enumerate() {
            *q = f.f32(256 + 4 * i);
        }
        let mut srow = [[0f32; 4]; 3];
        for (r, row) in srow.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = f.f32(280 + 16 * r + 4 * c);
            }
        }
        let descrip = String::from_utf8_lossy(&bytes[148..228])
            .trim_end_matches('\0')
            .to_string();

        Ok(Self {
            little_endian: le,
            dims,
            pixdim,
            datatype,
            vox_offset: vox as usize,
            scl_slope: f.f32(112),
            scl_inter: f.f32(116),
            qform_code: f.i16(252),
            sform_code: f.i16(254),
            quatern,
            srow,
            descrip,
        })
    }
}

/// Maps file axes onto the volume's `(x, y, z)`, with optional flips.
///
/// Parsed from text such as `x,y,z` (identity), `-x,z,y` or `y,x,-z`: entry
/// `i` names the file axis that becomes output axis `i`, and a leading `-`
/// reverses it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisMap {
    pub source: [usize; 3],
    pub flip: [bool; 3],
}

impl Default for AxisMap {
    fn default() -> Self {
        Self {
            source: [0, 1, 2],
            flip: [false; 3],
        }
    }
}

impl AxisMap {
    pub fn new(source: [usize; 3], flip: [bool; 3]) -> Result<Self> {
        let mut seen = [false; 3];
        for &s in &source {
            if s > 2 || seen[s] {
                return Err(Error::invalid(format!("axis map {source:?} is not a permutation")));
            }
            seen[s] = true;
        }
        Ok(Self { source, flip })
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::default()
    }

    fn apply(&self, file_dims: [usize; 3], spacing: [f64; 3], data: Vec<f32>) -> (Dims, [f64; 3], Vec<f32>) {
        if self.is_identity() {
            return (Dims::new(file_dims[0], file_dims[1], file_dims[2]), spacing, data);
        }
        let out: [usize; 3] = std::array::from_fn(|i| file_dims[self.source[i]]);
        let sp: [f64; 3] = std::array::from_fn(|i| spacing[self.source[i]]);
        let stride = [1, file_dims[0], file_dims[0] * file_dims[1]];
        let mut res = Vec::with_capacity(data.len());
        for oz in 0..out[2] {
            for oy in 0..out[1] {
                for ox in 0..out[0] {
                    let o = [ox, oy, oz];
                    let mut idx = 0;
                    for i in 0..3 {
                        let c = if self.flip[i] { out[i] - 1 - o[i] } else { o[i] };
                        idx += c * stride[self.source[i]];
                    }
                    res.push(data[idx]);
                }
            }
        }
        (Dims::new(out[0], out[1], out[2]), sp, res)
    }
}

impl FromStr for AxisMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::invalid(format!("axis map {s:?} needs three comma-separated axes")));
        }
        let mut source = [0; 3];
        let mut flip = [false; 3];
        for (i, p) in parts.iter().enumerate() {
            let (neg, name) = match p.strip_prefix('-') {
                Some(rest) => (true, rest),
                None => (false, *p),
            };
            source[i] = match name {
                "x" | "0" => 0,
                "y" | "1" => 1,
                "z" | "2" => 2,
                _ => return Err(Error::invalid(format!("unknown axis {p:?} in {s:?}"))),
            };
            flip[i] = neg;
        }
        Self::new(source, flip)
    }
}

impl fmt::Display for AxisMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = ["x", "y", "z"];
        let parts: Vec<String> = (0..3)
            .map(|i| format!("{}{}", if self.flip[i] { "-" } else { "" }, names[self.source[i]]))
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

fn decompress_if_gzip(bytes: Vec<u8>, path: &Path) -> Result<Vec<u8>> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        MultiGzDecoder::new(&bytes[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

/// Decodes an uncompressed NIfTI-1 image.
pub fn decode_nifti(bytes: &[u8], axes: AxisMap) -> Result<(Volume3D, NiftiHeader)> {
    let h = NiftiHeader::parse(bytes)?;
    log::debug!(
        "nifti: dims {:?}, pixdim {:?}, datatype {}, qform_code {} quatern {:?}, sform_code {} srow {:?}",
        h.dims, h.pixdim, h.datatype, h.qform_code, h.quatern, h.sform_code, h.srow
    );
    if h.qform_code > 0 || h.sform_code > 0 {
        log::info!(
            "orientation matrices present (qform_code {}, sform_code {}) and not applied",
            h.qform_code,
            h.sform_code
        );
    }

    let size = datatype_size(h.datatype).expect("checked in parse");
    let count = h.dims.iter().product::<usize>();
    let needed = count as u64 * size as u64;
    let available = bytes.len().saturating_sub(h.vox_offset) as u64;
    if available < needed {
        return Err(Error::parse(
            "payload",
            format!("truncated: {needed} bytes needed after vox_offset {}, {available} present", h.vox_offset),
        ));
    }
    if available > needed {
        log::warn!("{} trailing bytes after the image payload ignored", available - needed);
    }
    let payload = &bytes[h.vox_offset..h.vox_offset + count * size];

    let le = h.little_endian;
    macro_rules! decode {
        ($t:ty, $n:expr) => {
            payload
                .chunks_exact($n)
                .map(|c| {
                    let b: [u8; $n] = c.try_into().expect("chunk size");
                    (if le { <$t>::from_le_bytes(b) } else { <$t>::from_be_bytes(b) }) as f64
                })
                .collect::<Vec<f64>>()
        };
    }
    let raw: Vec<f64> = match h.datatype {
        DT_UINT8 => payload.iter().map(|&b| b as f64).collect(),
        DT_INT16 => decode!(i16, 2),
        DT_UINT16 => decode!(u16, 2),
        DT_FLOAT32 => decode!(f32, 4),
        DT_FLOAT64 => decode!(f64, 8),
        _ => unreachable!("checked in parse"),
    };

    let (slope, inter) = (h.scl_slope as f64, h.scl_inter as f64);
    let data: Vec<f32> = if slope == 0.0 || !slope.is_finite() {
        if slope != 0.0 || inter != 0.0 {
            log::warn!("scl_slope {slope} is not usable; intensities left unscaled");
        } else {
            log::info!("scl_slope 0 treated as identity scaling");
        }
        raw.into_iter().map(|v| v as f32).collect()
    } else if slope == 1.0 && inter == 0.0 {
        raw.into_iter().map(|v| v as f32).collect()
    } else {
        raw.into_iter().map(|v| (v * slope + inter) as f32).collect()
    };

    let spacing = h.pixdim.map(|p| p as f64);
    let (dims, sp, data) = axes.apply(h.dims, spacing, data);
    let vol = Volume3D::new(dims, Spacing::new(sp[0], sp[1], sp[2])?, data, VolumeKind::Intensity)?;
    Ok((vol, h))
}

/// Reads a `.nii` or `.nii.gz` file as an intensity volume in file axis order.
pub fn read_nifti(path: impl AsRef<Path>) -> Result<Volume3D> {
    read_nifti_with(path, AxisMap::default()).map(|(v, _)| v)
}

pub fn read_nifti_with(path: impl AsRef<Path>, axes: AxisMap) -> Result<(Volume3D, NiftiHeader)> {
    let path = path.as_ref();
    let bytes = decompress_if_gzip(super::read_bytes(path)?, path)?;
    decode_nifti(&bytes, axes)
}

/// Encodes a volume as little-endian NIfTI-1: f32 for intensities, u8 for labels.
///
/// Spacing is stored as f32.
pub fn encode_nifti(volume: &Volume3D) -> Result<Vec<u8>> {
    let d = volume.dims();
    for (i, n) in [d.nx, d.ny, d.nz].into_iter().enumerate() {
        if n > i16::MAX as usize {
            return Err(Error::invalid(format!("dim[{}] = {n} does not fit the NIfTI-1 header", i + 1)));
        }
    }
    let (datatype, bitpix) = match volume.kind() {
        VolumeKind::Intensity => (DT_FLOAT32, 32i16),
        VolumeKind::Label => (DT_UINT8, 8i16),
    };
    let mut h = vec![0u8; VOX_OFFSET];
    let put = |h: &mut Vec<u8>, off: usize, b: &[u8]| h[off..off + b.len()].copy_from_slice(b);
    put(&mut h, 0, &348i32.to_le_bytes());
    let dim: [i16; 8] = [3, d.nx as i16, d.ny as i16, d.nz as i16, 1, 1, 1, 1];
    for (i, v) in dim.iter().enumerate() {
        put(&mut h, 40 + 2 * i, &v.to_le_bytes());
    }
    put(&mut h, 70, &datatype.to_le_bytes());
    put(&mut h, 72, &bitpix.to_le_bytes());
    let s = volume.spacing();
    let pixdim: [f32; 8] = [1.0, s.sx as f32, s.sy as f32, s.sz as f32, 0.0, 0.0, 0.0, 0.0];
    for (i, v) in pixdim.iter().enumerate() {
        put(&mut h, 76 + 4 * i, &v.to_le_bytes());
    }
    put(&mut h, 108, &(VOX_OFFSET as f32).to_le_bytes());
    put(&mut h, 112, &1f32.to_le_bytes());
    // xyzt_units: millimeters
    h[123] = 2;
    put(&mut h, 148, b"mip-core");
    put(&mut h, 344, b"n+1\0");

    let data = volume.data();
    match volume.kind() {
        VolumeKind::Intensity => {
            h.reserve(data.len() * 4);
            for v in data {
                h.extend_from_slice(&v.to_le_bytes());
            }
        }
        VolumeKind::Label => h.extend(data.iter().map(|&v| v as u8)),
    }
    Ok(h)
}

/// Writes `volume`, gzip-compressed when the path ends in `.gz`.
pub fn write_nifti(volume: &Volume3D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raw = encode_nifti(volume)?;
    let gz = path.extension().is_some_and(|e| e == "gz");
    let bytes = if gz {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&raw).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?
    } else {
        raw
    };
    super::write_bytes(path, &bytes)
}
