//! Segmentation overlap, Hausdorff distance and classification metrics.

mod edt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::{MipImage, MipStack};

pub use edt::squared_edt;

/// A 2D binary mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(rows: usize, cols: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "mask has {} pixels, {rows}x{cols} needs {}",
                data.len(),
                rows * cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![false; rows * cols],
        }
    }

    /// Foreground where the image is non-zero.
    pub fn from_image(img: &MipImage) -> Self {
        Self {
            rows: img.rows,
            cols: img.cols,
            data: img.data.iter().map(|&v| v != 0.0).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// `(row, col)` of every foreground pixel.
    pub fn points(&self) -> Vec<(usize, usize)> {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(p, _)| (p / self.cols, p % self.cols))
            .collect()
    }
}

fn check_shapes(a: &BinaryMask, b: &BinaryMask) -> Result<()> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(Error::invalid(format!(
            "mask shapes differ: {}x{} vs {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(())
}

fn overlap(a: &BinaryMask, b: &BinaryMask) -> (usize, usize, usize) {
    let mut inter = 0;
    let (mut na, mut nb) = (0, 0);
    for (&x, &y) in a.data.iter().zip(&b.data) {
        na += x as usize;
        nb += y as usize;
        inter += (x && y) as usize;
    }
    (inter, na, nb)
}

/// `2|A∩B| / (|A| + |B|)`, 1 when both masks are empty.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    check_shapes(a, b)?;
    let (inter, na, nb) = overlap(a, b);
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// `|A∩B| / |A∪B|`, 1 when both masks are empty.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    check_shapes(a, b)?;
    let (inter, na, nb) = overlap(a, b);
    let union = na + nb - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Masks with at most this many foreground-pair distance evaluations use the
/// direct double loop.
const BRUTE_FORCE_PAIRS: usize = 1 << 14;

/// Symmetric Hausdorff distance over foreground pixels, in pixel units.
///
/// `Some(0.0)` when both masks are empty, `None` (undefined) when exactly one is.
pub fn hausdorff(a: &BinaryMask, b: &BinaryMask) -> Result<Option<f64>> {
    check_shapes(a, b)?;
    let (na, nb) = (a.count(), b.count());
    if na.saturating_mul(nb) <= BRUTE_FORCE_PAIRS {
        hausdorff_brute_force(a, b)
    } else {
        hausdorff_edt(a, b)
    }
}

/// Hausdorff distance by nearest-point search over every pair.
pub fn hausdorff_brute_force(a: &BinaryMask, b: &BinaryMask) -> Result<Option<f64>> {
    check_shapes(a, b)?;
    let (pa, pb) = (a.points(), b.points());
    match (pa.is_empty(), pb.is_empty()) {
        (true, true) => return Ok(Some(0.0)),
        (true, false) | (false, true) => return Ok(None),
        _ => {}
    }
    let directed = |from: &[(usize, usize)], to: &[(usize, usize)]| -> i64 {
        from.iter()
            .map(|&(r, c)| {
                to.iter()
                    .map(|&(r2, c2)| {
                        let (dr, dc) = (r as i64 - r2 as i64, c as i64 - c2 as i64);
                        dr * dr + dc * dc
                    })
                    .min()
                    .expect("non-empty")
            })
            .max()
            .expect("non-empty")
    };
    let d2 = directed(&pa, &pb).max(directed(&pb, &pa));
    Ok(Some((d2 as f64).sqrt()))
}

/// Hausdorff distance from two exact Euclidean distance transforms.
pub fn hausdorff_edt(a: &BinaryMask, b: &BinaryMask) -> Result<Option<f64>> {
    check_shapes(a, b)?;
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Ok(Some(0.0)),
        (true, false) | (false, true) => return Ok(None),
        _ => {}
    }
    let directed = |from: &BinaryMask, to: &BinaryMask| -> f64 {
        let dt = squared_edt(&to.data, to.rows, to.cols);
        from.data
            .iter()
            .zip(&dt)
            .filter(|(&f, _)| f)
            .map(|(_, &d)| d)
            .fold(0.0, f64::max)
    };
    let d2 = directed(a, b).max(directed(b, a));
    Ok(Some(d2.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegScores {
    pub dice: f64,
    pub iou: f64,
    /// Pixel units; `None` when exactly one mask is empty.
    pub hausdorff: Option<f64>,
}

pub fn seg_scores(pred: &BinaryMask, truth: &BinaryMask) -> Result<SegScores> {
    Ok(SegScores {
        dice: dice(pred, truth)?,
        iou: iou(pred, truth)?,
        hausdorff: hausdorff(pred, truth)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    /// `None` when there are no positive predictions.
    pub precision: Option<f64>,
    /// `None` when there are no positive cases.
    pub recall: Option<f64>,
    pub f1: f64,
}

pub fn classification_metrics(c: &ConfusionCounts) -> Result<ClassificationMetrics> {
    let total = c.tp + c.fp + c.tn + c.fn_;
    if total == 0 {
        return Err(Error::invalid("confusion counts are all zero"));
    }
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let (p, r) = (precision.unwrap_or(0.0), recall.unwrap_or(0.0));
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    Ok(ClassificationMetrics {
        accuracy: (c.tp + c.tn) as f64 / total as f64,
        precision,
        recall,
        f1,
    })
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateScore {
    pub mean: f64,
    pub std_dev: f64,
    pub n: usize,
}

pub fn aggregate(values: &[f64]) -> Result<AggregateScore> {
    if values.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty list"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(AggregateScore {
        mean,
        std_dev: var.sqrt(),
        n: values.len(),
    })
}

/// Scores of one predicted stack against its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackScores {
    pub angles: Vec<f64>,
    pub per_mip: Vec<SegScores>,
    pub mean_dice: f64,
    pub mean_iou: f64,
    /// Mean over MIPs with a defined distance; `None` if there are none.
    pub mean_hausdorff: Option<f64>,
    pub hausdorff_undefined: usize,
}

/// Per-MIP scores and their per-case mean over angles.
pub fn score_stacks(pred: &MipStack, truth: &MipStack) -> Result<StackScores> {
    if pred.plan != truth.plan {
        return Err(Error::GeometryMismatch(format!(
            "prediction has {} angles, ground truth {}",
            pred.plan.n(),
            truth.plan.n()
        )));
    }
    if pred.rows() != truth.rows() || pred.cols() != truth.cols() {
        return Err(Error::GeometryMismatch(format!(
            "prediction is {}x{}, ground truth {}x{}",
            pred.rows(),
            pred.cols(),
            truth.rows(),
            truth.cols()
        )));
    }
    let per_mip = pred
        .images
        .iter()
        .zip(&truth.images)
        .map(|(p, t)| seg_scores(&BinaryMask::from_image(p), &BinaryMask::from_image(t)))
        .collect::<Result<Vec<_>>>()?;
    let n = per_mip.len() as f64;
    let defined: Vec<f64> = per_mip.iter().filter_map(|s| s.hausdorff).collect();
    let undefined = per_mip.len() - defined.len();
    if undefined > 0 {
        log::warn!("{undefined} of {} MIPs have an undefined Hausdorff distance", per_mip.len());
    }
    Ok(StackScores {
        angles: pred.plan.angles().to_vec(),
        mean_dice: per_mip.iter().map(|s| s.dice).sum::<f64>() / n,
        mean_iou: per_mip.iter().map(|s| s.iou).sum::<f64>() / n,
        mean_hausdorff: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
        hausdorff_undefined: undefined,
        per_mip,
    })
}
