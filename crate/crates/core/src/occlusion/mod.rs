//! Occlusion correction of projected lesion annotations.
//!
//! A projected annotation component is trusted when enough of its pixels
//! take their displayed intensity from a lesion voxel. Otherwise only the
//! lesion-originated pixels are kept, and every surviving fragment must
//! still stand out from its surroundings and reach a minimum size.

mod components;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::projection::{MipImage, MipKind, MipStack, ProvenanceMap};
use crate::volume::{Volume3D, VolumeKind};

pub use components::{connected_components, label_volume_26, ComponentMap, Connectivity};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcclusionConfig {
    /// Minimum fraction of lesion-originated pixels for a component to be kept whole.
    pub origin_threshold: f64,
    pub connectivity: Connectivity,
    pub min_fragment_px: usize,
    /// Fragment mean must reach this multiple of the surrounding ring mean.
    pub contrast_ratio_min: f64,
    /// Chessboard radius of the ring around a fragment.
    pub contrast_ring_radius_px: usize,
}

impl Default for OcclusionConfig {
    fn default() -> Self {
        Self {
            origin_threshold: 0.75,
            connectivity: Connectivity::Eight,
            min_fragment_px: 4,
            contrast_ratio_min: 1.15,
            contrast_ring_radius_px: 3,
        }
    }
}

impl OcclusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.origin_threshold > 0.0 && self.origin_threshold <= 1.0) {
            return Err(Error::invalid(format!(
                "origin threshold must be in (0, 1], got {}",
                self.origin_threshold
            )));
        }
        if !(self.contrast_ratio_min >= 1.0 && self.contrast_ratio_min.is_finite()) {
            return Err(Error::invalid(format!(
                "contrast ratio must be >= 1, got {}",
                self.contrast_ratio_min
            )));
        }
        if self.contrast_ring_radius_px == 0 {
            return Err(Error::invalid("contrast ring radius must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Kept,
    Split,
    /// No pixel of the component originated from a lesion.
    RemovedOccluded,
    RemovedLowContrast,
    RemovedSmall,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Kept => "kept",
            Action::Split => "split",
            Action::RemovedOccluded => "removed-occluded",
            Action::RemovedLowContrast => "removed-low-contrast",
            Action::RemovedSmall => "removed-small",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDecision {
    pub component_id: u32,
    pub pixel_count: usize,
    pub tumor_origin_fraction: f64,
    pub action: Action,
    pub retained_pixel_count: usize,
}

/// Outcome of occlusion detection and splitting for one component, before filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub component_id: u32,
    pub pixel_count: usize,
    pub tumor_origin_fraction: f64,
    /// `Kept`, `Split` or `RemovedOccluded`.
    pub action: Action,
    /// Retained pixels, ascending.
    pub retained: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterVerdict {
    Keep,
    DropLowContrast,
    DropTooSmall,
}

/// Fraction of `component` whose source voxel exists and is labeled lesion.
pub fn tumor_origin_fraction(component: &[usize], provenance: &ProvenanceMap, labels3d: &Volume3D) -> Result<f64> {
    if component.is_empty() {
        return Err(Error::invalid("component is empty"));
    }
    let hits = component
        .iter()
        .filter(|&&p| is_tumor_origin(provenance, labels3d, p))
        .count();
    Ok(hits as f64 / component.len() as f64)
}

#[inline]
fn is_tumor_origin(provenance: &ProvenanceMap, labels3d: &Volume3D, pixel: usize) -> bool {
    provenance
        .voxel_at(pixel)
        .is_some_and(|[x, y, z]| labels3d.get(x, y, z) != 0.0)
}

/// Occlusion detection and annotation splitting.
///
/// `tumor_origin(p)` says whether pixel `p` takes its intensity from a lesion.
/// Components at or above `threshold` are kept whole; the rest keep only their
/// lesion-originated pixels.
pub fn detect_and_split(
    annotation: &[bool],
    rows: usize,
    cols: usize,
    connectivity: Connectivity,
    threshold: f64,
    tumor_origin: impl Fn(usize) -> bool,
) -> Vec<SplitOutcome> {
    let cm = connected_components(annotation, rows, cols, connectivity);
    cm.pixel_lists()
        .into_iter()
        .enumerate()
        .map(|(k, pixels)| {
            let origin: Vec<usize> = pixels.iter().copied().filter(|&p| tumor_origin(p)).collect();
            let fraction = origin.len() as f64 / pixels.len() as f64;
            let (action, retained) = if fraction >= threshold {
                (Action::Kept, pixels.clone())
            } else if origin.is_empty() {
                (Action::RemovedOccluded, origin)
            } else {
                (Action::Split, origin)
            };
            SplitOutcome {
                component_id: k as u32 + 1,
                pixel_count: pixels.len(),
                tumor_origin_fraction: fraction,
                action,
                retained,
            }
        })
        .collect()
}

/// Low-contrast and size test for one fragment.
///
/// The ring is the chessboard dilation of the fragment minus the fragment,
/// restricted to `in_field` pixels when given.
pub fn low_contrast_filter(
    fragment: &[usize],
    intensity: &MipImage,
    in_field: Option<&[bool]>,
    cfg: &OcclusionConfig,
) -> Result<FilterVerdict> {
    if fragment.is_empty() {
        return Err(Error::invalid("fragment is empty"));
    }
    if fragment.len() < cfg.min_fragment_px {
        return Ok(FilterVerdict::DropTooSmall);
    }
    let (rows, cols) = (intensity.rows, intensity.cols);
    let mut member = vec![false; rows * cols];
    let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
    let mut sum_in = 0.0f64;
    for &p in fragment {
        member[p] = true;
        let (r, c) = (p / cols, p % cols);
        r0 = r0.min(r);
        r1 = r1.max(r);
        c0 = c0.min(c);
        c1 = c1.max(c);
        sum_in += intensity.data[p] as f64;
    }
    let m_in = sum_in / fragment.len() as f64;

    let rad = cfg.contrast_ring_radius_px;
    let (rr0, rr1) = (r0.saturating_sub(rad), (r1 + rad).min(rows - 1));
    let (cc0, cc1) = (c0.saturating_sub(rad), (c1 + rad).min(cols - 1));
    let mut sum_ring = 0.0f64;
    let mut n_ring = 0usize;
    for r in rr0..=rr1 {
        for c in cc0..=cc1 {
            let p = r * cols + c;
            if member[p] || in_field.is_some_and(|f| !f[p]) {
                continue;
            }
            let near = (r.saturating_sub(rad)..=(r + rad).min(rows - 1)).any(|rr| {
                (c.saturating_sub(rad)..=(c + rad).min(cols - 1)).any(|cc| member[rr * cols + cc])
            });
            if near {
                sum_ring += intensity.data[p] as f64;
                n_ring += 1;
            }
        }
    }
    if n_ring == 0 {
        return Ok(FilterVerdict::Keep);
    }
    let m_ring = sum_ring / n_ring as f64;
    Ok(if m_in >= cfg.contrast_ratio_min * m_ring {
        FilterVerdict::Keep
    } else {
        FilterVerdict::DropLowContrast
    })
}

/// Runs the low-contrast and size filters over split outcomes.
///
/// Returns the surviving pixel mask and one decision per component.
pub fn filter_outcomes(
    outcomes: &[SplitOutcome],
    intensity: &MipImage,
    in_field: Option<&[bool]>,
    cfg: &OcclusionConfig,
) -> Result<(Vec<bool>, Vec<ComponentDecision>)> {
    let (rows, cols) = (intensity.rows, intensity.cols);
    let mut survive = vec![false; rows * cols];
    let mut decisions = Vec::with_capacity(outcomes.len());
    let mut scratch = vec![false; rows * cols];
    for o in outcomes {
        let mut retained = 0usize;
        let mut low_contrast = false;
        if !o.retained.is_empty() {
            for &p in &o.retained {
                scratch[p] = true;
            }
            let frags = connected_components(&scratch, rows, cols, cfg.connectivity);
            for &p in &o.retained {
                scratch[p] = false;
            }
            let mut lists = vec![Vec::new(); frags.count];
            for &p in &o.retained {
                lists[frags.labels[p] as usize - 1].push(p);
            }
            for frag in &lists {
                match low_contrast_filter(frag, intensity, in_field, cfg)? {
                    FilterVerdict::Keep => {
                        retained += frag.len();
                        for &p in frag {
                            survive[p] = true;
                        }
                    }
                    FilterVerdict::DropLowContrast => low_contrast = true,
                    FilterVerdict::DropTooSmall => {}
                }
            }
        }
        let action = match o.action {
            Action::RemovedOccluded => Action::RemovedOccluded,
            _ if retained == 0 && low_contrast => Action::RemovedLowContrast,
            _ if retained == 0 => Action::RemovedSmall,
            Action::Kept if retained == o.pixel_count => Action::Kept,
            _ => Action::Split,
        };
        decisions.push(ComponentDecision {
            component_id: o.component_id,
            pixel_count: o.pixel_count,
            tumor_origin_fraction: o.tumor_origin_fraction,
            action,
            retained_pixel_count: retained,
        });
    }
    Ok((survive, decisions))
}

fn check_geometry(annotation: &MipImage, intensity: &MipImage, provenance: &ProvenanceMap) -> Result<()> {
    if annotation.kind != MipKind::Label {
        return Err(Error::invalid("annotation MIP must be a label image"));
    }
    if !annotation.same_geometry(intensity) || provenance.rows != annotation.rows || provenance.cols != annotation.cols {
        return Err(Error::invalid(format!(
            "geometry mismatch: annotation {}x{}, intensity {}x{}, provenance {}x{}",
            annotation.rows, annotation.cols, intensity.rows, intensity.cols, provenance.rows, provenance.cols
        )));
    }
    if annotation.angle_deg.to_bits() != intensity.angle_deg.to_bits() {
        return Err(Error::invalid(format!(
            "angle mismatch: annotation {}°, intensity {}°",
            annotation.angle_deg, intensity.angle_deg
        )));
    }
    Ok(())
}

/// Every provenance voxel must address `labels3d`.
fn check_provenance_bounds(provenance: &ProvenanceMap, labels3d: &Volume3D) -> Result<()> {
    let d = labels3d.dims();
    let outside = (0..provenance.data.len())
        .filter_map(|p| provenance.voxel_at(p))
        .any(|[x, y, z]| x >= d.nx || y >= d.ny || z >= d.nz);
    if outside {
        return Err(Error::GeometryMismatch(format!(
            "provenance addresses voxels outside the {}x{}x{} annotation volume",
            d.nx, d.ny, d.nz
        )));
    }
    Ok(())
}

/// The full three-step correction of one annotation MIP.
pub fn correct_mip(
    annotation: &MipImage,
    intensity: &MipImage,
    provenance: &ProvenanceMap,
    labels3d: &Volume3D,
    cfg: &OcclusionConfig,
) -> Result<(MipImage, Vec<ComponentDecision>)> {
    cfg.validate()?;
    check_geometry(annotation, intensity, provenance)?;
    if labels3d.kind() != VolumeKind::Label {
        return Err(Error::invalid("3D annotation must be a label volume"));
    }
    check_provenance_bounds(provenance, labels3d)?;
    let mask: Vec<bool> = annotation.data.iter().map(|&v| v != 0.0).collect();
    let outcomes = detect_and_split(
        &mask,
        annotation.rows,
        annotation.cols,
        cfg.connectivity,
        cfg.origin_threshold,
        |p| is_tumor_origin(provenance, labels3d, p),
    );
    let in_field = provenance.in_field();
    let (survive, decisions) = filter_outcomes(&outcomes, intensity, Some(&in_field), cfg)?;
    let corrected = MipImage {
        rows: annotation.rows,
        cols: annotation.cols,
        data: survive.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect(),
        angle_deg: annotation.angle_deg,
        kind: MipKind::Label,
    };
    Ok((corrected, decisions))
}

/// Decisions for one MIP of a stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipDecisions {
    pub angle_deg: f64,
    pub decisions: Vec<ComponentDecision>,
}

/// Lesion-level exclusion counts of one case (or a pooled dataset).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExclusionStats {
    pub tumors_total: usize,
    pub tumors_excluded: usize,
    pub tumor_voxels_total: usize,
    pub excluded_voxels: usize,
}

impl ExclusionStats {
    pub fn excluded_fraction(&self) -> f64 {
        if self.tumors_total == 0 {
            0.0
        } else {
            self.tumors_excluded as f64 / self.tumors_total as f64
        }
    }

    pub fn volume_excluded_fraction(&self) -> f64 {
        if self.tumor_voxels_total == 0 {
            0.0
        } else {
            self.excluded_voxels as f64 / self.tumor_voxels_total as f64
        }
    }

    /// Pools counts over cases.
    pub fn merge(&self, other: &ExclusionStats) -> ExclusionStats {
        ExclusionStats {
            tumors_total: self.tumors_total + other.tumors_total,
            tumors_excluded: self.tumors_excluded + other.tumors_excluded,
            tumor_voxels_total: self.tumor_voxels_total + other.tumor_voxels_total,
            excluded_voxels: self.excluded_voxels + other.excluded_voxels,
        }
    }
}

/// Counts 3D lesions (26-connected) that no surviving annotation pixel traces back to.
pub fn exclusion_stats(corrected: &MipStack, provenance: &[ProvenanceMap], labels3d: &Volume3D) -> Result<ExclusionStats> {
    if provenance.len() != corrected.images.len() {
        return Err(Error::invalid(format!(
            "{} provenance maps for {} corrected MIPs",
            provenance.len(),
            corrected.images.len()
        )));
    }
    let (ids, sizes) = label_volume_26(labels3d);
    let dims = labels3d.dims();
    let mut seen = vec![false; sizes.len()];
    for (img, prov) in corrected.images.iter().zip(provenance) {
        if prov.rows != img.rows || prov.cols != img.cols {
            return Err(Error::GeometryMismatch("provenance does not match corrected MIP".into()));
        }
        check_provenance_bounds(prov, labels3d)?;
        for (p, &v) in img.data.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            if let Some([x, y, z]) = prov.voxel_at(p) {
                let id = ids[dims.index(x, y, z)];
                if id > 0 {
                    seen[id as usize - 1] = true;
                }
            }
        }
    }
    let mut stats = ExclusionStats {
        tumors_total: sizes.len(),
        tumor_voxels_total: sizes.iter().sum(),
        ..Default::default()
    };
    for (k, &s) in seen.iter().enumerate() {
        if !s {
            stats.tumors_excluded += 1;
            stats.excluded_voxels += sizes[k];
        }
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionReport {
    pub config: OcclusionConfig,
    pub per_mip: Vec<MipDecisions>,
    pub exclusion: ExclusionStats,
}

impl CorrectionReport {
    pub fn components_before(&self) -> usize {
        self.per_mip.iter().map(|m| m.decisions.len()).sum()
    }

    pub fn pixels_retained(&self) -> usize {
        self.per_mip
            .iter()
            .flat_map(|m| &m.decisions)
            .map(|d| d.retained_pixel_count)
            .sum()
    }
}

/// Corrects every MIP of an annotation stack against the intensity stack.
pub fn correct_stack(
    annotations: &MipStack,
    intensity: &MipStack,
    labels3d: &Volume3D,
    cfg: &OcclusionConfig,
    exec: Execution,
) -> Result<(MipStack, CorrectionReport)> {
    cfg.validate()?;
    let provenance = intensity
        .provenance
        .as_ref()
        .ok_or_else(|| Error::invalid("intensity stack has no provenance"))?;
    if annotations.plan != intensity.plan {
        return Err(Error::invalid(format!(
            "annotation stack has {} angles, intensity stack {}",
            annotations.plan.n(),
            intensity.plan.n()
        )));
    }
    let results = exec.map(annotations.images.len(), |k| {
        correct_mip(
            &annotations.images[k],
            &intensity.images[k],
            &provenance[k],
            labels3d,
            cfg,
        )
    });
    let mut images = Vec::with_capacity(results.len());
    let mut per_mip = Vec::with_capacity(results.len());
    for (k, r) in results.into_iter().enumerate() {
        let (img, decisions) = r?;
        images.push(img);
        per_mip.push(MipDecisions {
            angle_deg: annotations.plan.angles()[k],
            decisions,
        });
    }
    let corrected = MipStack::new(annotations.plan.clone(), images, None)?;
    let exclusion = exclusion_stats(&corrected, provenance, labels3d)?;
    Ok((
        corrected,
        CorrectionReport {
            config: *cfg,
            per_mip,
            exclusion,
        },
    ))
}
