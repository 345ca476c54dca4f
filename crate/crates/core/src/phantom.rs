//! Synthetic sphere phantoms and a ray-marching visibility oracle.
//!
//! Voxels belong to a sphere when their center lies inside it. Intensity is
//! the maximum of the background and every containing sphere; the lesion
//! label is the union of the tumor spheres regardless of intensity.
//!
//! Noise is Gaussian, drawn from ChaCha8 keyed by the seed with one stream
//! per axial slice, so output does not depend on how slices are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::projection::RayGeometry;
use crate::volume::{Dims, Spacing, Volume3D, VolumeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SphereKind {
    Organ,
    Tumor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereSpec {
    /// Center in voxel coordinates.
    pub center: [f64; 3],
    /// Radius in voxels.
    pub radius: f64,
    pub intensity: f32,
    pub kind: SphereKind,
}

impl SphereSpec {
    pub fn organ(center: [f64; 3], radius: f64, intensity: f32) -> Self {
        Self {
            center,
            radius,
            intensity,
            kind: SphereKind::Organ,
        }
    }

    pub fn tumor(center: [f64; 3], radius: f64, intensity: f32) -> Self {
        Self {
            center,
            radius,
            intensity,
            kind: SphereKind::Tumor,
        }
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        let dx = x as f64 - self.center[0];
        let dy = y as f64 - self.center[1];
        let dz = z as f64 - self.center[2];
        dx * dx + dy * dy + dz * dz <= self.radius * self.radius
    }

    fn misses(&self, dims: Dims) -> bool {
        let extent = [dims.nx, dims.ny, dims.nz];
        (0..3).any(|a| {
            self.center[a] + self.radius < 0.0 || self.center[a] - self.radius > (extent[a] - 1) as f64
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: Dims,
    pub spacing: Spacing,
    pub background: f32,
    pub spheres: Vec<SphereSpec>,
    pub noise_sigma: f32,
    pub seed: u64,
}

impl PhantomSpec {
    pub fn new(dims: Dims, background: f32) -> Self {
        Self {
            dims,
            spacing: Spacing::default(),
            background,
            spheres: Vec::new(),
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn with_sphere(mut self, s: SphereSpec) -> Self {
        self.spheres.push(s);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::invalid("phantom dims must be non-zero"));
        }
        Spacing::new(self.spacing.sx, self.spacing.sy, self.spacing.sz)?;
        if !(self.background.is_finite() && self.background >= 0.0) {
            return Err(Error::invalid(format!("background must be >= 0, got {}", self.background)));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invalid(format!("noise sigma must be >= 0, got {}", self.noise_sigma)));
        }
        for (i, s) in self.spheres.iter().enumerate() {
            if !(s.radius.is_finite() && s.radius > 0.0) {
                return Err(Error::invalid(format!("sphere {i}: radius must be positive")));
            }
            if !(s.intensity.is_finite() && s.intensity > 0.0) {
                return Err(Error::invalid(format!("sphere {i}: intensity must be positive")));
            }
            if s.center.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid(format!("sphere {i}: center must be finite")));
            }
            if self.noise_sigma == 0.0 && s.intensity <= self.background {
                return Err(Error::invalid(format!(
                    "sphere {i}: intensity {} must exceed the background {} in a noiseless phantom",
                    s.intensity, self.background
                )));
            }
        }
        Ok(())
    }
}

/// Which object supplies a voxel's value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Winner {
    Background,
    /// Index into `PhantomSpec::spheres`.
    Organ(usize),
    Tumor(usize),
}

impl Winner {
    pub fn is_tumor(self) -> bool {
        matches!(self, Winner::Tumor(_))
    }
}

/// Noiseless value and owning object of a voxel.
///
/// A voxel inside any tumor sphere belongs to the first such tumor, matching
/// the label union; otherwise to the brightest containing organ.
fn classify(spec: &PhantomSpec, x: usize, y: usize, z: usize) -> (f32, Winner) {
    let mut value = spec.background;
    let mut tumor = None;
    let mut organ: Option<(usize, f32)> = None;
    for (i, s) in spec.spheres.iter().enumerate() {
        if !s.contains(x, y, z) {
            continue;
        }
        value = value.max(s.intensity);
        match s.kind {
            SphereKind::Tumor if tumor.is_none() => tumor = Some(i),
            SphereKind::Organ if organ.is_none_or(|(_, v)| s.intensity > v) => {
                organ = Some((i, s.intensity))
            }
            _ => {}
        }
    }
    let winner = match (tumor, organ) {
        (Some(t), _) => Winner::Tumor(t),
        (None, Some((o, _))) => Winner::Organ(o),
        (None, None) => Winner::Background,
    };
    (value, winner)
}

/// Builds the intensity volume and the binary tumor label volume.
pub fn generate(spec: &PhantomSpec) -> Result<(Volume3D, Volume3D)> {
    generate_with(spec, Execution::default())
}

pub fn generate_with(spec: &PhantomSpec, exec: Execution) -> Result<(Volume3D, Volume3D)> {
    spec.validate()?;
    for (i, s) in spec.spheres.iter().enumerate() {
        if s.misses(spec.dims) {
            log::warn!("sphere {i} lies entirely outside the {:?} volume", spec.dims);
        }
    }
    let d = spec.dims;
    let slice_len = d.nx * d.ny;
    let noise = if spec.noise_sigma > 0.0 {
        Some(Normal::new(0.0f32, spec.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?)
    } else {
        None
    };

    let mut values = vec![0f32; d.len()];
    let mut labels = vec![0f32; d.len()];
    let mut pairs: Vec<(&mut [f32], &mut [f32])> = values
        .chunks_mut(slice_len)
        .zip(labels.chunks_mut(slice_len))
        .collect();
    exec.for_each_chunk(&mut pairs, 1, |z, chunk| {
        let (vals, labs) = &mut chunk[0];
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(z as u64);
        for y in 0..d.ny {
            for x in 0..d.nx {
                let (v, w) = classify(spec, x, y, z);
                let i = x + d.nx * y;
                vals[i] = match &noise {
                    Some(n) => v + n.sample(&mut rng),
                    None => v,
                };
                labs[i] = if w.is_tumor() { 1.0 } else { 0.0 };
            }
        }
    });
    let pet = Volume3D::new(d, spec.spacing, values, VolumeKind::Intensity)?;
    let lab = Volume3D::new(d, spec.spacing, labels, VolumeKind::Label)?;
    Ok((pet, lab))
}

/// Per-pixel winner of one projection angle, rows = z, cols = canvas columns.
#[derive(Debug, Clone, PartialEq)]
pub struct WinnerMap {
    pub rows: usize,
    pub cols: usize,
    /// `None` where the ray misses the volume.
    pub winners: Vec<Option<Winner>>,
}

impl WinnerMap {
    pub fn tumor_won(&self, pixel: usize) -> bool {
        self.winners[pixel].is_some_and(Winner::is_tumor)
    }
}

/// Marches every depth ray through nearest voxel centers and records which
/// object supplies the maximum (first one on ties).
///
/// Uses the analytic spheres, not a generated volume. The canvas geometry is
/// the one used by projection on an isotropic in-plane grid.
pub fn oracle_visibility(spec: &PhantomSpec, angle_deg: f64) -> Result<WinnerMap> {
    spec.validate()?;
    if spec.noise_sigma != 0.0 {
        return Err(Error::invalid("the visibility oracle needs a noiseless phantom"));
    }
    if spec.spacing.sx != spec.spacing.sy {
        return Err(Error::invalid("the visibility oracle needs isotropic in-plane spacing"));
    }
    let d = spec.dims;
    let geom = RayGeometry::new(d.nx, d.ny, angle_deg)?;
    let cols = geom.cols();
    let mut winners = vec![None; d.nz * cols];
    for z in 0..d.nz {
        for col in 0..cols {
            let mut best: Option<(f32, Winner)> = None;
            for depth in 0..geom.depth() {
                let Some((x, y)) = geom.nearest_voxel(col, depth) else {
                    continue;
                };
                let (v, w) = classify(spec, x, y, z);
                if best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, w));
                }
            }
            winners[z * cols + col] = best.map(|(_, w)| w);
        }
    }
    Ok(WinnerMap {
        rows: d.nz,
        cols,
        winners,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{project_mip, Interpolation};

    #[test]
    fn empty_phantom_is_uniform() {
        let spec = PhantomSpec::new(Dims::new(5, 4, 3), 0.7);
        let (pet, lab) = generate(&spec).unwrap();
        assert!(pet.data().iter().all(|&v| v == 0.7));
        assert!(lab.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tumor_sphere_voxel_count() {
        let spec = PhantomSpec::new(Dims::new(21, 21, 21), 0.5)
            .with_sphere(SphereSpec::tumor([10.0, 10.0, 10.0], 5.0, 6.0));
        let (_, lab) = generate(&spec).unwrap();
        let count = lab.data().iter().filter(|&&v| v == 1.0).count();
        // integer points of a radius-5 ball, counted directly
        let mut oracle = 0;
        for x in -5i32..=5 {
            for y in -5i32..=5 {
                for z in -5i32..=5 {
                    if x * x + y * y + z * z <= 25 {
                        oracle += 1;
                    }
                }
            }
        }
        assert_eq!(count, oracle);
        let ball = 4.0 / 3.0 * std::f64::consts::PI * 125.0;
        assert!((count as f64 - ball).abs() / ball < 0.02, "{count} vs {ball}");
    }

    #[test]
    fn generation_is_deterministic_and_schedule_free() {
        let mut spec = PhantomSpec::new(Dims::new(9, 8, 7), 1.0)
            .with_sphere(SphereSpec::organ([4.0, 4.0, 3.0], 3.0, 5.0));
        spec.noise_sigma = 0.3;
        spec.seed = 99;
        let a = generate_with(&spec, Execution::Sequential).unwrap();
        let b = generate_with(&spec, Execution::Parallel).unwrap();
        let c = generate(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        spec.seed = 100;
        assert_ne!(generate(&spec).unwrap().0, a.0);
    }

    #[test]
    fn overlap_resolves_by_intensity_and_labels_by_union() {
        let spec = PhantomSpec::new(Dims::new(9, 9, 9), 0.5)
            .with_sphere(SphereSpec::organ([4.0, 4.0, 4.0], 4.0, 9.0))
            .with_sphere(SphereSpec::tumor([4.0, 4.0, 4.0], 1.5, 3.0));
        let (pet, lab) = generate(&spec).unwrap();
        assert_eq!(pet.get(4, 4, 4), 9.0);
        assert_eq!(lab.get(4, 4, 4), 1.0);
        assert_eq!(lab.get(4, 4, 7), 0.0);
    }

    #[test]
    fn outside_sphere_is_a_warning_not_an_error() {
        let spec = PhantomSpec::new(Dims::new(4, 4, 4), 0.0)
            .with_sphere(SphereSpec::tumor([40.0, 2.0, 2.0], 2.0, 3.0));
        let (_, lab) = generate(&spec).unwrap();
        assert!(lab.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_specs() {
        let base = PhantomSpec::new(Dims::new(4, 4, 4), 1.0);
        assert!(base.clone().with_sphere(SphereSpec::tumor([1.0; 3], 0.0, 3.0)).validate().is_err());
        assert!(base.clone().with_sphere(SphereSpec::tumor([1.0; 3], 1.0, 0.5)).validate().is_err());
        let mut noisy = base.clone();
        noisy.noise_sigma = 0.1;
        assert!(oracle_visibility(&noisy, 0.0).is_err());
    }

    #[test]
    fn lone_tumor_wins_its_disk() {
        let spec = PhantomSpec::new(Dims::new(16, 16, 12), 0.5)
            .with_sphere(SphereSpec::tumor([7.0, 8.0, 6.0], 3.0, 5.0));
        for angle in [0.0, 37.0, 90.0] {
            let map = oracle_visibility(&spec, angle).unwrap();
            let geom = RayGeometry::new(16, 16, angle).unwrap();
            for z in 0..12 {
                for col in 0..map.cols {
                    let hits = (0..geom.depth()).any(|d| {
                        geom.nearest_voxel(col, d).is_some_and(|(x, y)| spec.spheres[0].contains(x, y, z))
                    });
                    assert_eq!(map.tumor_won(z * map.cols + col), hits);
                }
            }
        }
    }

    #[test]
    fn organ_in_front_occludes_then_separates() {
        // organ along the depth (y) axis in front of the tumor; disjoint in x
        let spec = PhantomSpec::new(Dims::new(24, 24, 12), 0.5)
            .with_sphere(SphereSpec::tumor([11.5, 17.0, 6.0], 2.5, 4.0))
            .with_sphere(SphereSpec::organ([11.5, 6.0, 6.0], 4.5, 8.0));
        let front = oracle_visibility(&spec, 0.0).unwrap();
        let side = oracle_visibility(&spec, 90.0).unwrap();
        assert!(!front.winners.iter().any(|w| w.is_some_and(Winner::is_tumor)));
        let side_tumor = side.winners.iter().filter(|w| w.is_some_and(Winner::is_tumor)).count();
        assert!(side_tumor > 0);
        // every side-view pixel over the tumor disk reports the tumor
        let geom = RayGeometry::new(24, 24, 90.0).unwrap();
        for z in 0..12 {
            for col in 0..side.cols {
                let over = (0..geom.depth()).any(|d| {
                    geom.nearest_voxel(col, d).is_some_and(|(x, y)| spec.spheres[0].contains(x, y, z))
                });
                assert_eq!(side.tumor_won(z * side.cols + col), over);
            }
        }
    }

    #[test]
    fn dim_organ_never_wins_over_tumor() {
        let spec = PhantomSpec::new(Dims::new(20, 20, 8), 0.2)
            .with_sphere(SphereSpec::tumor([10.0, 14.0, 4.0], 3.0, 6.0))
            .with_sphere(SphereSpec::organ([10.0, 5.0, 4.0], 4.0, 2.0));
        for angle in [0.0, 45.0, 90.0, 135.0] {
            let map = oracle_visibility(&spec, angle).unwrap();
            let geom = RayGeometry::new(20, 20, angle).unwrap();
            for z in 0..8 {
                for col in 0..map.cols {
                    let over = (0..geom.depth()).any(|d| {
                        geom.nearest_voxel(col, d).is_some_and(|(x, y)| spec.spheres[0].contains(x, y, z))
                    });
                    assert_eq!(map.tumor_won(z * map.cols + col), over);
                }
            }
        }
    }

    #[test]
    fn provenance_agrees_with_oracle() {
        let spec = PhantomSpec::new(Dims::new(20, 18, 10), 0.3)
            .with_sphere(SphereSpec::tumor([6.0, 12.0, 5.0], 3.0, 4.0))
            .with_sphere(SphereSpec::organ([9.0, 5.0, 5.0], 4.0, 7.0))
            .with_sphere(SphereSpec::tumor([14.0, 9.0, 3.0], 2.0, 9.0));
        let (pet, lab) = generate(&spec).unwrap();
        for angle in [0.0, 22.5, 60.0, 90.0, 151.0] {
            let (_, prov) = project_mip(&pet, angle, Interpolation::Nearest).unwrap();
            let map = oracle_visibility(&spec, angle).unwrap();
            assert_eq!((map.rows, map.cols), (prov.rows, prov.cols));
            for p in 0..prov.data.len() {
                let via_prov = prov.voxel_at(p).map(|[x, y, z]| lab.get(x, y, z) == 1.0);
                assert_eq!(via_prov, map.winners[p].map(Winner::is_tumor), "pixel {p} at {angle}");
            }
        }
    }
}
