//! 16-bit binary PGM export with a linear intensity window.

use std::path::Path;

use crate::error::{Error, Result};
use crate::projection::MipImage;

/// Maps `v` to `round(65535 · clamp((v − lo)/(hi − lo), 0, 1))`, halves up.
/// NaN maps to 0.
pub fn window_sample(v: f32, lo: f64, hi: f64) -> u16 {
    let t = ((v as f64 - lo) / (hi - lo)).clamp(0.0, 1.0);
    if t.is_nan() {
        return 0;
    }
    (65535.0 * t + 0.5).floor() as u16
}

pub fn encode_pgm(mip: &MipImage, lo: f64, hi: f64) -> Result<Vec<u8>> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!("window [{lo}, {hi}] must satisfy lo < hi")));
    }
    let mut b = format!("P5\n{} {}\n65535\n", mip.cols, mip.rows).into_bytes();
    b.reserve(mip.data.len() * 2);
    for &v in &mip.data {
        b.extend_from_slice(&window_sample(v, lo, hi).to_be_bytes());
    }
    Ok(b)
}

pub fn export_pgm(mip: &MipImage, path: impl AsRef<Path>, window: (f64, f64)) -> Result<()> {
    super::write_bytes(path.as_ref(), &encode_pgm(mip, window.0, window.1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::MipKind;

    fn constant(v: f32) -> MipImage {
        MipImage::new(2, 3, vec![v; 6], 0.0, MipKind::Intensity).unwrap()
    }

    #[test]
    fn window_edges_and_midpoint() {
        let header = b"P5\n3 2\n65535\n";
        let lo = encode_pgm(&constant(1.0), 1.0, 3.0).unwrap();
        assert_eq!(&lo[..header.len()], header);
        assert!(lo[header.len()..].iter().all(|&b| b == 0));
        let hi = encode_pgm(&constant(3.0), 1.0, 3.0).unwrap();
        assert!(hi[header.len()..].iter().all(|&b| b == 0xff));
        let mid = encode_pgm(&constant(2.0), 1.0, 3.0).unwrap();
        assert_eq!(&mid[header.len()..header.len() + 2], &32768u16.to_be_bytes());
        assert_eq!(mid.len(), header.len() + 12);
    }

    #[test]
    fn clamps_and_rejects_degenerate_windows() {
        assert_eq!(window_sample(-5.0, 0.0, 1.0), 0);
        assert_eq!(window_sample(5.0, 0.0, 1.0), 65535);
        assert_eq!(window_sample(f32::NAN, 0.0, 1.0), 0);
        assert!(encode_pgm(&constant(1.0), 2.0, 2.0).is_err());
        assert!(encode_pgm(&constant(1.0), 3.0, 2.0).is_err());
    }
}
