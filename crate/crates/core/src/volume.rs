//! 3D scalar volumes, axis conventions and SUV normalization.
//!
//! Axes: `x` is left-right, `y` anterior-posterior (the projection depth
//! axis) and `z` superior-inferior (the yaw axis). Data is stored x-fastest,
//! then y, then z, so each axial slice is one contiguous run of `nx * ny`
//! values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Voxel size in millimeters along x, y and z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spacing {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl Spacing {
    pub fn new(sx: f64, sy: f64, sz: f64) -> Result<Self> {
        for (name, v) in [("sx", sx), ("sy", sy), ("sz", sz)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "spacing {name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self { sx, sy, sz })
    }

    pub fn isotropic(s: f64) -> Result<Self> {
        Self::new(s, s, s)
    }
}

impl Default for Spacing {
    fn default() -> Self {
        Self {
            sx: 1.0,
            sy: 1.0,
            sz: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VolumeKind {
    /// Continuous intensities (SUV after normalization).
    Intensity,
    /// Binary annotation, values restricted to 0 and 1.
    Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Self { nx, ny, nz }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    pub fn contains(&self, x: i64, y: i64, z: i64) -> bool {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < self.nx
            && (y as usize) < self.ny
            && (z as usize) < self.nz
    }
}

/// A dense scalar volume.
///
/// Construction checks structure (length, spacing). Content rules such as
/// finiteness and label binarity are reported by [`validate`] and enforced
/// by [`Volume3D::ensure_valid`] at the operations that need them.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    dims: Dims,
    spacing: Spacing,
    data: Vec<f32>,
    kind: VolumeKind,
}

impl Volume3D {
    pub fn new(dims: Dims, spacing: Spacing, data: Vec<f32>, kind: VolumeKind) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid(format!("volume dims must be non-zero, got {dims:?}")));
        }
        if data.len() != dims.len() {
            return Err(Error::invalid(format!(
                "volume data has {} values, dims {}x{}x{} need {}",
                data.len(),
                dims.nx,
                dims.ny,
                dims.nz,
                dims.len()
            )));
        }
        Spacing::new(spacing.sx, spacing.sy, spacing.sz)?;
        Ok(Self {
            dims,
            spacing,
            data,
            kind,
        })
    }

    /// Builds an intensity volume and rejects non-finite values.
    pub fn intensity(dims: Dims, spacing: Spacing, data: Vec<f32>) -> Result<Self> {
        let v = Self::new(dims, spacing, data, VolumeKind::Intensity)?;
        v.ensure_valid()?;
        Ok(v)
    }

    /// Builds a label volume and rejects values other than 0 and 1.
    pub fn labels(dims: Dims, spacing: Spacing, data: Vec<f32>) -> Result<Self> {
        let v = Self::new(dims, spacing, data, VolumeKind::Label)?;
        v.ensure_valid()?;
        Ok(v)
    }

    pub fn filled(dims: Dims, spacing: Spacing, value: f32, kind: VolumeKind) -> Result<Self> {
        Self::new(dims, spacing, vec![value; dims.len()], kind)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn kind(&self) -> VolumeKind {
        self.kind
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.dims.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: f32) {
        let i = self.dims.index(x, y, z);
        self.data[i] = v;
    }

    /// The contiguous axial slice at `z`.
    pub fn slice(&self, z: usize) -> &[f32] {
        let n = self.dims.nx * self.dims.ny;
        &self.data[z * n..(z + 1) * n]
    }

    /// Reinterprets the volume as a label volume, checking binarity.
    pub fn into_labels(self) -> Result<Self> {
        let v = Self {
            kind: VolumeKind::Label,
            ..self
        };
        v.ensure_valid()?;
        Ok(v)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let diag = validate(self);
        if diag.non_finite() > 0 {
            return Err(Error::invalid(format!(
                "volume has {} NaN and {} infinite values",
                diag.nan_count, diag.inf_count
            )));
        }
        if self.kind == VolumeKind::Label && !diag.is_binary() {
            return Err(Error::invalid(format!(
                "label volume is not binary, distinct values {:?}",
                diag.distinct_values.unwrap_or_default()
            )));
        }
        Ok(())
    }
}

/// Content report produced by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub nan_count: usize,
    pub inf_count: usize,
    /// Min and max over finite values; `None` when there are none.
    pub min: Option<f32>,
    pub max: Option<f32>,
    /// Sorted distinct values for label volumes (capped at 256 entries).
    pub distinct_values: Option<Vec<f32>>,
}

impl Diagnostics {
    pub fn non_finite(&self) -> usize {
        self.nan_count + self.inf_count
    }

    /// `true` unless this is a label report with a value outside {0, 1}.
    pub fn is_binary(&self) -> bool {
        match &self.distinct_values {
            Some(vals) => vals.iter().all(|&v| v == 0.0 || v == 1.0),
            None => true,
        }
    }
}

const MAX_DISTINCT: usize = 256;

pub fn validate(volume: &Volume3D) -> Diagnostics {
    let mut nan_count = 0;
    let mut inf_count = 0;
    let mut min = f32::INFINITY;
    let mut max = f32::NEG_INFINITY;
    let mut distinct: Option<Vec<f32>> = (volume.kind == VolumeKind::Label).then(Vec::new);

    for &v in &volume.data {
        if v.is_nan() {
            nan_count += 1;
            continue;
        }
        if v.is_infinite() {
            inf_count += 1;
            continue;
        }
        min = min.min(v);
        max = max.max(v);
        if let Some(d) = distinct.as_mut() {
            // -0.0 and 0.0 are the same label
            let v = if v == 0.0 { 0.0 } else { v };
            if d.len() < MAX_DISTINCT && !d.contains(&v) {
                d.push(v);
            }
        }
    }
    if let Some(d) = distinct.as_mut() {
        d.sort_by(f32::total_cmp);
    }
    let any = min <= max;
    Diagnostics {
        nan_count,
        inf_count,
        min: any.then_some(min),
        max: any.then_some(max),
        distinct_values: distinct,
    }
}

/// Injected dose (Bq, decay-corrected to scan time) and body weight (g).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuvParams {
    pub injected_dose: f64,
    pub body_weight: f64,
}

impl SuvParams {
    pub fn new(injected_dose: f64, body_weight: f64) -> Result<Self> {
        let p = Self {
            injected_dose,
            body_weight,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if !(self.injected_dose.is_finite() && self.injected_dose > 0.0) {
            return Err(Error::invalid(format!(
                "injected dose must be positive, got {}",
                self.injected_dose
            )));
        }
        if !(self.body_weight.is_finite() && self.body_weight > 0.0) {
            return Err(Error::invalid(format!(
                "body weight must be positive, got {}",
                self.body_weight
            )));
        }
        Ok(())
    }
}

/// Body-weight SUV: `activity [Bq/mL] * weight [g] / dose [Bq]`.
pub fn suv_normalize(activity: &Volume3D, params: &SuvParams) -> Result<Volume3D> {
    params.check()?;
    if activity.kind != VolumeKind::Intensity {
        return Err(Error::invalid("SUV normalization needs an intensity volume"));
    }
    let (w, d) = (params.body_weight, params.injected_dose);
    let data = activity
        .data
        .iter()
        .map(|&a| (a as f64 * w / d) as f32)
        .collect();
    Volume3D::new(activity.dims, activity.spacing, data, VolumeKind::Intensity)
}
