//! Canvas geometry shared by every projection at one angle.
//!
//! The output canvas is a square of `cols` columns by `depth` depth samples
//! centered on the axial slice. A canvas point `(u, v)` relative to the
//! canvas center maps to the slice position
//!
//! ```text
//! x = cx + cos(θ)·u − sin(θ)·v
//! y = cy + sin(θ)·u + cos(θ)·v
//! ```
//!
//! where `(cx, cy)` is the continuous slice center. A sample is in the field
//! of view when its nearest voxel, `floor(p + 0.5)`, lies inside the slice.

use crate::error::{Error, Result};

/// Smallest integer `>= sqrt(a² + b²)` with the same parity as `parity_of`.
///
/// Matching parity makes canvas sample positions land on voxel centers at
/// 0° for every slice size.
fn circumscribing(a: usize, b: usize, parity_of: usize) -> usize {
    let diag = ((a * a + b * b) as f64).sqrt();
    let mut w = diag.ceil() as usize;
    // guard against sqrt rounding below an exact integer
    while (w * w) < a * a + b * b {
        w += 1;
    }
    if w % 2 != parity_of % 2 {
        w += 1;
    }
    w.max(1)
}

/// `(cols, depth)` of the canvas used for an `nx × ny` slice.
pub fn canvas_size(nx: usize, ny: usize) -> (usize, usize) {
    (circumscribing(nx, ny, nx), circumscribing(nx, ny, ny))
}

/// `(cos θ, sin θ)` for an angle in degrees.
///
/// Multiples of 90° are exact, and `θ + 180°` yields exactly the negated
/// pair of `θ`, so opposite views sample bit-identical positions.
pub fn rotation(angle_deg: f64) -> Result<(f64, f64)> {
    if !angle_deg.is_finite() {
        return Err(Error::invalid(format!("angle must be finite, got {angle_deg}")));
    }
    let a = angle_deg.rem_euclid(360.0);
    let (base, sign) = if a >= 180.0 { (a - 180.0, -1.0) } else { (a, 1.0) };
    let (c, s) = if base == 0.0 {
        (1.0, 0.0)
    } else if base == 90.0 {
        (0.0, 1.0)
    } else {
        let r = base.to_radians();
        (r.cos(), r.sin())
    };
    Ok((sign * c, sign * s))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayGeometry {
    nx: usize,
    ny: usize,
    cols: usize,
    depth: usize,
    cos: f64,
    sin: f64,
}

const SNAP: f64 = 1e-9;

#[inline]
fn snap(p: f64) -> f64 {
    let r = p.round();
    if (p - r).abs() < SNAP {
        r
    } else {
        p
    }
}

impl RayGeometry {
    pub fn new(nx: usize, ny: usize, angle_deg: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid("slice dimensions must be non-zero"));
        }
        let (cos, sin) = rotation(angle_deg)?;
        let (cols, depth) = canvas_size(nx, ny);
        Ok(Self {
            nx,
            ny,
            cols,
            depth,
            cos,
            sin,
        })
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn slice_dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Continuous slice position of canvas column `col` at depth index `d`.
    #[inline]
    pub fn position(&self, col: usize, d: usize) -> (f64, f64) {
        let u = col as f64 - (self.cols as f64 - 1.0) / 2.0;
        let v = d as f64 - (self.depth as f64 - 1.0) / 2.0;
        let cx = (self.nx as f64 - 1.0) / 2.0;
        let cy = (self.ny as f64 - 1.0) / 2.0;
        let x = cx + (self.cos * u - self.sin * v);
        let y = cy + (self.sin * u + self.cos * v);
        (snap(x), snap(y))
    }

    /// Nearest voxel `(x, y)` of a sample, or `None` outside the field of view.
    #[inline]
    pub fn nearest_voxel(&self, col: usize, d: usize) -> Option<(usize, usize)> {
        let (x, y) = self.position(col, d);
        let ix = (x + 0.5).floor();
        let iy = (y + 0.5).floor();
        if ix >= 0.0 && iy >= 0.0 && ix < self.nx as f64 && iy < self.ny as f64 {
            Some((ix as usize, iy as usize))
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canvas_covers_diagonal_with_parity() {
        assert_eq!(canvas_size(32, 32), (46, 46));
        assert_eq!(canvas_size(192, 192), (272, 272));
        assert_eq!(canvas_size(3, 4), (5, 6));
        assert_eq!(canvas_size(1, 1), (3, 3));
        for nx in 1..40 {
            for ny in 1..40 {
                let (c, d) = canvas_size(nx, ny);
                assert!((c * c) >= nx * nx + ny * ny);
                assert_eq!(c % 2, nx % 2);
                assert_eq!(d % 2, ny % 2);
            }
        }
    }

    #[test]
    fn rotation_special_angles() {
        assert_eq!(rotation(0.0).unwrap(), (1.0, 0.0));
        assert_eq!(rotation(90.0).unwrap(), (0.0, 1.0));
        assert_eq!(rotation(180.0).unwrap(), (-1.0, -0.0));
        assert_eq!(rotation(270.0).unwrap(), (-0.0, -1.0));
        assert_eq!(rotation(-90.0).unwrap(), rotation(270.0).unwrap());
        assert!(rotation(f64::NAN).is_err());
        assert!(rotation(f64::INFINITY).is_err());
    }

    #[test]
    fn opposite_angles_negate_exactly() {
        for &a in &[11.25, 33.3, 3.75, 170.0, 123.456] {
            let (c, s) = rotation(a).unwrap();
            let (c2, s2) = rotation(a + 180.0).unwrap();
            assert!((c + c2).abs() < 1e-12 && (s + s2).abs() < 1e-12);
        }
        // exactly representable sums negate bit-for-bit
        let (c, s) = rotation(11.25).unwrap();
        assert_eq!(rotation(191.25).unwrap(), (-c, -s));
    }

    #[test]
    fn identity_lands_on_voxel_centers() {
        let g = RayGeometry::new(32, 20, 0.0).unwrap();
        let off_x = (g.cols() - 32) / 2;
        let off_y = (g.depth() - 20) / 2;
        assert_eq!(g.nearest_voxel(off_x + 5, off_y + 7), Some((5, 7)));
        assert_eq!(g.position(off_x + 5, off_y + 7), (5.0, 7.0));
        assert_eq!(g.nearest_voxel(0, 0), None);
    }

    #[test]
    fn quarter_turn_maps_columns_to_depth_axis() {
        let g = RayGeometry::new(8, 8, 90.0).unwrap();
        let off = (g.cols() - 8) / 2;
        // column runs along +y, depth runs along -x
        let (x, y) = g.position(off + 2, off + 1);
        assert_eq!((x, y), (6.0, 2.0));
    }
}
