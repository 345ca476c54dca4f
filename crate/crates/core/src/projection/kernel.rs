use std::borrow::Cow;

use super::geometry::RayGeometry;
use super::{Interpolation, MipImage, MipKind, ProvenanceMap, VoxelTriple, OUT_OF_FIELD};
use crate::error::Result;
use crate::exec::Execution;
use crate::volume::{Dims, Spacing, Volume3D, VolumeKind};

/// Volume on an isotropic in-plane grid plus the way back to source voxels.
pub(super) struct ProjectionGrid<'a> {
    volume: Cow<'a, Volume3D>,
    /// Grid x (resp. y) index to source x (resp. y) index; `None` when the
    /// grid is the source volume itself.
    back_x: Option<Vec<i32>>,
    back_y: Option<Vec<i32>>,
    kind: MipKind,
}

/// Linear sample: value is the bilinear blend of the 2×2 block at `base`.
#[derive(Clone, Copy)]
struct LinearTap {
    base: u32,
    step_x: u32,
    step_y: u32,
    nearest: u32,
    fx: f64,
    fy: f64,
}

/// Samples of every column, in depth order, restricted to the field of view.
struct Taps<T> {
    starts: Vec<usize>,
    taps: Vec<T>,
}

impl<T> Taps<T> {
    fn column(&self, col: usize) -> &[T] {
        &self.taps[self.starts[col]..self.starts[col + 1]]
    }
}

fn build_taps<T>(geom: &RayGeometry, mut tap: impl FnMut(usize, usize) -> Option<T>) -> Taps<T> {
    let mut starts = Vec::with_capacity(geom.cols() + 1);
    let mut taps = Vec::new();
    for col in 0..geom.cols() {
        starts.push(taps.len());
        for d in 0..geom.depth() {
            if let Some(t) = tap(col, d) {
                taps.push(t);
            }
        }
    }
    starts.push(taps.len());
    Taps { starts, taps }
}

fn linear_taps(geom: &RayGeometry) -> Taps<LinearTap> {
    let (nx, ny) = geom.slice_dims();
    let axis = |p: f64, n: usize| -> (usize, u32, f64) {
        let p = p.clamp(0.0, (n - 1) as f64);
        if n == 1 {
            return (0, 0, 0.0);
        }
        let i0 = (p.floor() as usize).min(n - 2);
        (i0, 1, p - i0 as f64)
    };
    build_taps(geom, |col, d| {
        let (ix, iy) = geom.nearest_voxel(col, d)?;
        let (x, y) = geom.position(col, d);
        let (x0, sx, fx) = axis(x, nx);
        let (y0, sy, fy) = axis(y, ny);
        Some(LinearTap {
            base: (x0 + nx * y0) as u32,
            step_x: sx,
            step_y: sy * nx as u32,
            nearest: (ix + nx * iy) as u32,
            fx,
            fy,
        })
    })
}

fn nearest_taps(geom: &RayGeometry) -> Taps<u32> {
    let (nx, _) = geom.slice_dims();
    build_taps(geom, |col, d| {
        geom.nearest_voxel(col, d).map(|(ix, iy)| (ix + nx * iy) as u32)
    })
}

#[inline]
fn bilinear(slice: &[f32], t: &LinearTap) -> f32 {
    let b = t.base as usize;
    let (sx, sy) = (t.step_x as usize, t.step_y as usize);
    let v00 = slice[b] as f64;
    let v10 = slice[b + sx] as f64;
    let v01 = slice[b + sy] as f64;
    let v11 = slice[b + sx + sy] as f64;
    let (fx, fy) = (t.fx, t.fy);
    let top = (1.0 - fx) * v00 + fx * v10;
    let bottom = (1.0 - fx) * v01 + fx * v11;
    ((1.0 - fy) * top + fy * bottom) as f32
}

/// Per-axis resampling of an anisotropic slice onto spacing `min(sx, sy)`.
struct AxisResample {
    n: usize,
    /// Source coordinate per grid index.
    source: Vec<f64>,
}

impl AxisResample {
    fn new(n_src: usize, spacing: f64, target: f64) -> Self {
        let n = (((n_src - 1) as f64 * spacing / target) + 1e-9).floor() as usize + 1;
        let source = (0..n).map(|i| i as f64 * target / spacing).collect();
        Self { n, source }
    }

    fn back_map(&self, n_src: usize) -> Vec<i32> {
        self.source
            .iter()
            .map(|&p| ((p + 0.5).floor() as i64).clamp(0, n_src as i64 - 1) as i32)
            .collect()
    }
}

fn resample_in_plane(volume: &Volume3D, interp: Interpolation) -> (Volume3D, Vec<i32>, Vec<i32>) {
    let dims = volume.dims();
    let sp = volume.spacing();
    let target = sp.sx.min(sp.sy);
    let rx = AxisResample::new(dims.nx, sp.sx, target);
    let ry = AxisResample::new(dims.ny, sp.sy, target);
    let out_dims = Dims::new(rx.n, ry.n, dims.nz);
    let mut data = vec![0f32; out_dims.len()];
    let back_x = rx.back_map(dims.nx);
    let back_y = ry.back_map(dims.ny);

    let lin = |p: f64, n: usize| -> (usize, usize, f64) {
        let p = p.clamp(0.0, (n - 1) as f64);
        let i0 = p.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, p - i0 as f64)
    };
    for z in 0..dims.nz {
        let slice = volume.slice(z);
        let out = &mut data[z * rx.n * ry.n..(z + 1) * rx.n * ry.n];
        for gy in 0..ry.n {
            for gx in 0..rx.n {
                out[gx + rx.n * gy] = match interp {
                    Interpolation::Nearest => {
                        slice[back_x[gx] as usize + dims.nx * back_y[gy] as usize]
                    }
                    Interpolation::Linear => {
                        let (x0, x1, fx) = lin(rx.source[gx], dims.nx);
                        let (y0, y1, fy) = lin(ry.source[gy], dims.ny);
                        let at = |x: usize, y: usize| slice[x + dims.nx * y] as f64;
                        let top = (1.0 - fx) * at(x0, y0) + fx * at(x1, y0);
                        let bottom = (1.0 - fx) * at(x0, y1) + fx * at(x1, y1);
                        ((1.0 - fy) * top + fy * bottom) as f32
                    }
                };
            }
        }
    }
    let spacing = Spacing {
        sx: target,
        sy: target,
        sz: sp.sz,
    };
    let resampled = Volume3D::new(out_dims, spacing, data, volume.kind())
        .expect("resampled dims are consistent");
    (resampled, back_x, back_y)
}

impl<'a> ProjectionGrid<'a> {
    pub(super) fn prepare(volume: &'a Volume3D, interp: Interpolation) -> Self {
        let kind = match volume.kind() {
            VolumeKind::Intensity => MipKind::Intensity,
            VolumeKind::Label => MipKind::Label,
        };
        let sp = volume.spacing();
        if sp.sx == sp.sy {
            return Self {
                volume: Cow::Borrowed(volume),
                back_x: None,
                back_y: None,
                kind,
            };
        }
        let (resampled, bx, by) = resample_in_plane(volume, interp);
        Self {
            volume: Cow::Owned(resampled),
            back_x: Some(bx),
            back_y: Some(by),
            kind,
        }
    }

    fn source_voxel(&self, offset: u32, z: usize) -> VoxelTriple {
        let nx = self.volume.dims().nx;
        let gx = offset as usize % nx;
        let gy = offset as usize / nx;
        let x = self.back_x.as_ref().map_or(gx as i32, |m| m[gx]);
        let y = self.back_y.as_ref().map_or(gy as i32, |m| m[gy]);
        [x, y, z as i32]
    }

    pub(super) fn project(
        &self,
        angle_deg: f64,
        interp: Interpolation,
        with_provenance: bool,
        exec: Execution,
    ) -> Result<(MipImage, Option<ProvenanceMap>)> {
        let dims = self.volume.dims();
        let geom = RayGeometry::new(dims.nx, dims.ny, angle_deg)?;
        let (rows, cols) = (dims.nz, geom.cols());
        let mut data = vec![0f32; rows * cols];
        // winning tap offset per pixel, u32::MAX when out of field
        let mut winners = vec![u32::MAX; rows * cols];

        match interp {
            Interpolation::Linear => {
                let taps = linear_taps(&geom);
                self.fill(&mut data, &mut winners, cols, exec, |slice, col| {
                    max_along(taps.column(col), |t| (bilinear(slice, t), t.nearest))
                });
            }
            Interpolation::Nearest => {
                let taps = nearest_taps(&geom);
                self.fill(&mut data, &mut winners, cols, exec, |slice, col| {
                    max_along(taps.column(col), |&t| (slice[t as usize], t))
                });
            }
        }

        let provenance = with_provenance.then(|| {
            let triples = winners
                .iter()
                .enumerate()
                .map(|(p, &w)| {
                    if w == u32::MAX {
                        OUT_OF_FIELD
                    } else {
                        self.source_voxel(w, p / cols)
                    }
                })
                .collect();
            ProvenanceMap {
                rows,
                cols,
                data: triples,
            }
        });
        let image = MipImage {
            rows,
            cols,
            data,
            angle_deg,
            kind: self.kind,
        };
        Ok((image, provenance))
    }

    fn fill<F>(&self, data: &mut [f32], winners: &mut [u32], cols: usize, exec: Execution, ray: F)
    where
        F: Fn(&[f32], usize) -> Option<(f32, u32)> + Sync + Send,
    {
        let mut rows: Vec<(&mut [f32], &mut [u32])> =
            data.chunks_mut(cols).zip(winners.chunks_mut(cols)).collect();
        exec.for_each_chunk(&mut rows, 1, |z, row| {
            let (out, win) = &mut row[0];
            let slice = self.volume.slice(z);
            for col in 0..cols {
                if let Some((v, w)) = ray(slice, col) {
                    out[col] = v;
                    win[col] = w;
                }
            }
        });
    }
}

/// Maximum along a ray; the first (shallowest) sample wins ties.
#[inline]
fn max_along<T>(taps: &[T], mut sample: impl FnMut(&T) -> (f32, u32)) -> Option<(f32, u32)> {
    let mut best: Option<(f32, u32)> = None;
    for t in taps {
        let (v, w) = sample(t);
        match best {
            Some((b, _)) if v <= b => {}
            _ => best = Some((v, w)),
        }
    }
    best
}
