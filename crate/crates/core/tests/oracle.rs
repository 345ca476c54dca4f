//! The projection and occlusion pipeline checked against the phantom
//! ray-marching oracle.

use mip_core::occlusion::{detect_and_split, exclusion_stats, correct_stack, Connectivity, OcclusionConfig};
use mip_core::phantom::{generate, oracle_visibility, PhantomSpec, SphereSpec};
use mip_core::projection::{project_labels, project_mip, project_stack};
use mip_core::{AngularPlan, Dims, Interpolation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_phantom(seed: u64) -> PhantomSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = Dims::new(rng.random_range(16..28), rng.random_range(16..28), rng.random_range(6..12));
    let mut spec = PhantomSpec::new(dims, 1.0);
    for i in 0..rng.random_range(1..5) {
        let center = [
            rng.random_range(0.0..dims.nx as f64),
            rng.random_range(0.0..dims.ny as f64),
            rng.random_range(0.0..dims.nz as f64),
        ];
        let radius = rng.random_range(1.5..6.0);
        // distinct intensities keep the winner unambiguous between objects
        let intensity = 2.0 + i as f32 * 1.5 + rng.random_range(0.0..1.0f32);
        let s = if rng.random_bool(0.5) {
            SphereSpec::tumor(center, radius, intensity)
        } else {
            SphereSpec::organ(center, radius, intensity)
        };
        spec = spec.with_sphere(s);
    }
    spec
}

#[test]
fn provenance_classifies_like_the_oracle() {
    for seed in 0..12 {
        let spec = random_phantom(seed);
        let (pet, labels) = generate(&spec).unwrap();
        for angle in [0.0, 22.5, 45.0, 90.0, 137.0, 180.0, 301.0] {
            let (_, prov) = project_mip(&pet, angle, Interpolation::Nearest).unwrap();
            let oracle = oracle_visibility(&spec, angle).unwrap();
            assert_eq!((prov.rows, prov.cols), (oracle.rows, oracle.cols));
            for p in 0..prov.data.len() {
                let from_prov = prov.voxel_at(p).map(|[x, y, z]| labels.get(x, y, z) != 0.0);
                let from_oracle = oracle.winners[p].map(|w| w.is_tumor());
                assert_eq!(from_prov, from_oracle, "seed {seed}, angle {angle}, pixel {p}");
            }
        }
    }
}

#[test]
fn split_decisions_follow_the_oracle() {
    let cfg = OcclusionConfig::default();
    for seed in 100..112 {
        let spec = random_phantom(seed);
        let (pet, labels) = generate(&spec).unwrap();
        let plan = AngularPlan::new(6).unwrap();
        let ann = project_labels(&labels, &plan).unwrap();
        for (k, &angle) in plan.angles().iter().enumerate() {
            let (_, prov) = project_mip(&pet, angle, Interpolation::Nearest).unwrap();
            let oracle = oracle_visibility(&spec, angle).unwrap();
            let img = &ann.images[k];
            let mask: Vec<bool> = img.data.iter().map(|&v| v != 0.0).collect();
            for conn in [Connectivity::Four, Connectivity::Eight] {
                let real = detect_and_split(&mask, img.rows, img.cols, conn, cfg.origin_threshold, |p| {
                    prov.voxel_at(p).is_some_and(|[x, y, z]| labels.get(x, y, z) != 0.0)
                });
                let truth = detect_and_split(&mask, img.rows, img.cols, conn, cfg.origin_threshold, |p| {
                    oracle.tumor_won(p)
                });
                assert_eq!(real, truth, "seed {seed}, angle {angle}");
            }
        }
    }
}

#[test]
fn enclosed_lesion_is_excluded_everywhere() {
    let dims = Dims::new(40, 40, 24);
    let spec = PhantomSpec::new(dims, 1.0)
        .with_sphere(SphereSpec::organ([20.0, 20.0, 12.0], 9.0, 10.0))
        .with_sphere(SphereSpec::tumor([20.0, 21.0, 12.0], 3.0, 6.0))
        .with_sphere(SphereSpec::tumor([6.0, 6.0, 12.0], 3.5, 8.0));
    let (pet, labels) = generate(&spec).unwrap();
    let plan = AngularPlan::new(8).unwrap();
    for interp in [Interpolation::Nearest, Interpolation::Linear] {
        let stack = project_stack(&pet, &plan, interp).unwrap();
        let ann = project_labels(&labels, &plan).unwrap();
        let (corrected, report) =
            correct_stack(&ann, &stack, &labels, &OcclusionConfig::default(), Default::default()).unwrap();
        let stats = exclusion_stats(&corrected, stack.provenance.as_ref().unwrap(), &labels).unwrap();
        assert_eq!(stats, report.exclusion);
        assert_eq!((stats.tumors_excluded, stats.tumors_total), (1, 2), "{interp:?}");
        let enclosed = labels
            .data()
            .iter()
            .enumerate()
            .filter(|&(i, &v)| v != 0.0 && (i % 40) > 12)
            .count();
        assert_eq!(stats.excluded_voxels, enclosed);
    }
}
