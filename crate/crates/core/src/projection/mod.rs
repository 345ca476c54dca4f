//! Multi-angle maximum intensity projection with voxel provenance.
//!
//! The volume is rotated about its superior-inferior (z) axis and projected
//! along the anterior-posterior depth direction. Because the rotation axis is
//! z, each axial slice is rotated independently in its own plane; MIP row
//! `r` is axial slice `z = r`.

mod geometry;
mod kernel;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::volume::{Volume3D, VolumeKind};

pub use geometry::{canvas_size, rotation, RayGeometry};

/// `N` equally spaced yaw angles covering `[0°, 180°)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularPlan {
    n: usize,
    delta_theta: f64,
    angles: Vec<f64>,
}

impl AngularPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("the number of MIPs must be at least 1"));
        }
        let angles = (0..n).map(|k| (k * 180) as f64 / n as f64).collect();
        Ok(Self {
            n,
            delta_theta: 180.0 / n as f64,
            angles,
        })
    }

    /// Recovers a plan from stored angles, which must match `new(angles.len())` exactly.
    pub fn from_angles(angles: &[f64]) -> Result<Self> {
        let plan = Self::new(angles.len())?;
        if plan.angles.iter().zip(angles).any(|(a, b)| a.to_bits() != b.to_bits()) {
            return Err(Error::invalid(format!(
                "angles {angles:?} are not an equal-step plan over [0, 180)"
            )));
        }
        Ok(plan)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta_theta(&self) -> f64 {
        self.delta_theta
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }
}

pub fn angular_plan(n: usize) -> Result<AngularPlan> {
    AngularPlan::new(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Interpolation {
    #[default]
    Linear,
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MipKind {
    Intensity,
    Label,
}

/// One projection. Rows follow z, columns follow the rotated in-plane axis.
#[derive(Debug, Clone, PartialEq)]
pub struct MipImage {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
    pub angle_deg: f64,
    pub kind: MipKind,
}

impl MipImage {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>, angle_deg: f64, kind: MipKind) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "image data has {} values, {rows}x{cols} needs {}",
                data.len(),
                rows * cols
            )));
        }
        Ok(Self {
            rows,
            cols,
            data,
            angle_deg,
            kind,
        })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.cols + col]
    }

    pub fn same_geometry(&self, other: &MipImage) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

/// Voxel index triple into the source volume, `(-1, -1, -1)` when out of field.
pub type VoxelTriple = [i32; 3];

pub const OUT_OF_FIELD: VoxelTriple = [-1, -1, -1];

/// Per-pixel source voxel of a [`MipImage`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvenanceMap {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<VoxelTriple>,
}

impl ProvenanceMap {
    pub fn new(rows: usize, cols: usize, data: Vec<VoxelTriple>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "provenance has {} entries, {rows}x{cols} needs {}",
                data.len(),
                rows * cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Source voxel `(x, y, z)` of a pixel, `None` for out-of-field pixels.
    #[inline]
    pub fn voxel(&self, row: usize, col: usize) -> Option<[usize; 3]> {
        let t = self.data[row * self.cols + col];
        (t[0] >= 0).then(|| [t[0] as usize, t[1] as usize, t[2] as usize])
    }

    #[inline]
    pub fn voxel_at(&self, pixel: usize) -> Option<[usize; 3]> {
        let t = self.data[pixel];
        (t[0] >= 0).then(|| [t[0] as usize, t[1] as usize, t[2] as usize])
    }

    /// Pixels with a source voxel.
    pub fn in_field(&self) -> Vec<bool> {
        self.data.iter().map(|t| t[0] >= 0).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipStack {
    pub plan: AngularPlan,
    pub images: Vec<MipImage>,
    /// Present for intensity stacks.
    pub provenance: Option<Vec<ProvenanceMap>>,
}

impl MipStack {
    pub fn new(plan: AngularPlan, images: Vec<MipImage>, provenance: Option<Vec<ProvenanceMap>>) -> Result<Self> {
        if images.len() != plan.n() {
            return Err(Error::invalid(format!(
                "stack has {} images for a {}-angle plan",
                images.len(),
                plan.n()
            )));
        }
        for (img, &a) in images.iter().zip(plan.angles()) {
            if img.angle_deg.to_bits() != a.to_bits() {
                return Err(Error::invalid(format!(
                    "image angle {} does not match plan angle {a}",
                    img.angle_deg
                )));
            }
            if !img.same_geometry(&images[0]) {
                return Err(Error::GeometryMismatch("stack images differ in size".into()));
            }
        }
        if let Some(p) = &provenance {
            if p.len() != images.len()
                || p.iter()
                    .any(|m| m.rows != images[0].rows || m.cols != images[0].cols)
            {
                return Err(Error::GeometryMismatch(
                    "provenance maps do not match the stack images".into(),
                ));
            }
        }
        Ok(Self {
            plan,
            images,
            provenance,
        })
    }

    pub fn rows(&self) -> usize {
        self.images[0].rows
    }

    pub fn cols(&self) -> usize {
        self.images[0].cols
    }

    pub fn kind(&self) -> MipKind {
        self.images[0].kind
    }
}

fn check_interp(volume: &Volume3D, interp: Interpolation) -> Result<()> {
    volume.ensure_valid()?;
    if volume.kind() == VolumeKind::Label && interp == Interpolation::Linear {
        return Err(Error::invalid("label volumes must be projected with nearest interpolation"));
    }
    Ok(())
}

/// Projects `volume` at `angle_deg` degrees.
///
/// Each pixel holds the maximum of the resampled values along its depth ray;
/// ties go to the smallest depth index. Pixels whose ray misses the volume
/// are 0 with [`OUT_OF_FIELD`] provenance.
pub fn project_mip(
    volume: &Volume3D,
    angle_deg: f64,
    interp: Interpolation,
) -> Result<(MipImage, ProvenanceMap)> {
    project_mip_with(volume, angle_deg, interp, Execution::default())
}

pub fn project_mip_with(
    volume: &Volume3D,
    angle_deg: f64,
    interp: Interpolation,
    exec: Execution,
) -> Result<(MipImage, ProvenanceMap)> {
    check_interp(volume, interp)?;
    let grid = kernel::ProjectionGrid::prepare(volume, interp);
    grid.project(angle_deg, interp, true, exec)
        .map(|(img, prov)| (img, prov.expect("provenance requested")))
}

/// One [`project_mip`] per plan angle, with provenance.
pub fn project_stack(volume: &Volume3D, plan: &AngularPlan, interp: Interpolation) -> Result<MipStack> {
    project_stack_with(volume, plan, interp, Execution::default())
}

pub fn project_stack_with(
    volume: &Volume3D,
    plan: &AngularPlan,
    interp: Interpolation,
    exec: Execution,
) -> Result<MipStack> {
    check_interp(volume, interp)?;
    let grid = kernel::ProjectionGrid::prepare(volume, interp);
    let results = exec.map(plan.n(), |k| grid.project(plan.angles()[k], interp, true, exec));
    let mut images = Vec::with_capacity(plan.n());
    let mut provenance = Vec::with_capacity(plan.n());
    for r in results {
        let (img, prov) = r?;
        images.push(img);
        provenance.push(prov.expect("provenance requested"));
    }
    MipStack::new(plan.clone(), images, Some(provenance))
}

/// Projects a binary annotation with nearest sampling; no provenance is kept.
pub fn project_labels(labels: &Volume3D, plan: &AngularPlan) -> Result<MipStack> {
    project_labels_with(labels, plan, Execution::default())
}

pub fn project_labels_with(labels: &Volume3D, plan: &AngularPlan, exec: Execution) -> Result<MipStack> {
    if labels.kind() != VolumeKind::Label {
        return Err(Error::invalid("project_labels needs a label volume"));
    }
    labels.ensure_valid()?;
    let grid = kernel::ProjectionGrid::prepare(labels, Interpolation::Nearest);
    let results = exec.map(plan.n(), |k| {
        grid.project(plan.angles()[k], Interpolation::Nearest, false, exec)
    });
    let images = results
        .into_iter()
        .map(|r| r.map(|(img, _)| img))
        .collect::<Result<Vec<_>>>()?;
    MipStack::new(plan.clone(), images, None)
}

/// The view from the opposite side: columns reversed, angle advanced by 180°
/// (reported modulo 360°).
pub fn mirror(mip: &MipImage) -> MipImage {
    let mut data = Vec::with_capacity(mip.data.len());
    for row in mip.data.chunks(mip.cols.max(1)) {
        data.extend(row.iter().rev());
    }
    MipImage {
        rows: mip.rows,
        cols: mip.cols,
        data,
        angle_deg: (mip.angle_deg + 180.0).rem_euclid(360.0),
        kind: mip.kind,
    }
}

#[cfg(test)]
mod tests;
