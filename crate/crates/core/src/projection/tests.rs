use super::*;
use crate::volume::{Dims, Spacing};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_volume(dims: Dims, seed: u64) -> Volume3D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..dims.len()).map(|_| rng.random_range(0.0f32..10.0)).collect();
    Volume3D::intensity(dims, Spacing::default(), data).unwrap()
}

/// Direct max over y for every (z, x), with the smallest maximizing y.
fn brute_axis_max_y(v: &Volume3D) -> Vec<Vec<(f32, usize)>> {
    let d = v.dims();
    (0..d.nz)
        .map(|z| {
            (0..d.nx)
                .map(|x| {
                    let mut best = (f32::NEG_INFINITY, 0);
                    for y in 0..d.ny {
                        if v.get(x, y, z) > best.0 {
                            best = (v.get(x, y, z), y);
                        }
                    }
                    best
                })
                .collect()
        })
        .collect()
}

#[test]
fn plan_step_sizes() {
    let p = angular_plan(16).unwrap();
    assert_eq!(p.delta_theta(), 11.25);
    assert_eq!(p.angles().len(), 16);
    assert_eq!(p.angles()[1], 11.25);
    assert_eq!(*p.angles().last().unwrap(), 168.75);
    assert_eq!(angular_plan(48).unwrap().delta_theta(), 3.75);
    let one = angular_plan(1).unwrap();
    assert_eq!((one.delta_theta(), one.angles()), (180.0, &[0.0][..]));
    assert!(matches!(angular_plan(0), Err(Error::InvalidParameter(_))));
}

#[test]
fn plan_angles_strictly_increasing_below_180() {
    for n in 1..200 {
        let p = angular_plan(n).unwrap();
        assert!(p.angles().windows(2).all(|w| w[0] < w[1]));
        assert!(p.angles().iter().all(|&a| (0.0..180.0).contains(&a)));
        assert_eq!(AngularPlan::from_angles(p.angles()).unwrap(), p);
    }
    assert!(AngularPlan::from_angles(&[0.0, 91.0]).is_err());
}

#[test]
fn constant_volume_projects_constant() {
    let dims = Dims::new(9, 7, 3);
    let v = Volume3D::filled(dims, Spacing::default(), 2.5, VolumeKind::Intensity).unwrap();
    for interp in [Interpolation::Linear, Interpolation::Nearest] {
        for angle in [0.0, 17.3, 45.0, 90.0, 133.7] {
            let (img, prov) = project_mip(&v, angle, interp).unwrap();
            let mut in_field = 0;
            for p in 0..img.data.len() {
                if prov.voxel_at(p).is_some() {
                    assert_eq!(img.data[p], 2.5);
                    in_field += 1;
                } else {
                    assert_eq!(img.data[p], 0.0);
                }
            }
            assert!(in_field >= 7 * 3);
        }
    }
}

#[test]
fn identity_angle_is_axis_max_any_shape() {
    for (i, dims) in [Dims::new(5, 8, 3), Dims::new(6, 3, 2), Dims::new(1, 4, 2), Dims::new(7, 7, 1)]
        .into_iter()
        .enumerate()
    {
        let v = random_volume(dims, i as u64);
        let oracle = brute_axis_max_y(&v);
        for interp in [Interpolation::Linear, Interpolation::Nearest] {
            let (img, prov) = project_mip(&v, 0.0, interp).unwrap();
            let off = (img.cols - dims.nx) / 2;
            for z in 0..dims.nz {
                for x in 0..dims.nx {
                    let (val, y) = oracle[z][x];
                    assert_eq!(img.get(z, x + off).to_bits(), val.to_bits());
                    assert_eq!(prov.voxel(z, x + off), Some([x, y, z]));
                }
                for c in (0..off).chain(off + dims.nx..img.cols) {
                    assert_eq!(prov.voxel(z, c), None);
                    assert_eq!(img.get(z, c), 0.0);
                }
            }
        }
    }
}

#[test]
fn quarter_turn_matches_axis_max_over_x() {
    let dims = Dims::new(10, 10, 4);
    let v = random_volume(dims, 7);
    let (img, prov) = project_mip(&v, 90.0, Interpolation::Linear).unwrap();
    let off = (img.cols - 10) / 2;
    for z in 0..dims.nz {
        for y in 0..dims.ny {
            // the depth ray runs from +x toward -x, so ties go to the largest x
            let mut best = (f32::NEG_INFINITY, 0);
            for x in (0..dims.nx).rev() {
                if v.get(x, y, z) > best.0 {
                    best = (v.get(x, y, z), x);
                }
            }
            assert_eq!(img.get(z, y + off).to_bits(), best.0.to_bits());
            assert_eq!(prov.voxel(z, y + off), Some([best.1, y, z]));
        }
    }
}

#[test]
fn single_hot_voxel_at_quarter_turn() {
    let dims = Dims::new(12, 12, 6);
    let (hx, hy, hz) = (3usize, 8usize, 2usize);
    let mut v = Volume3D::filled(dims, Spacing::default(), 0.0, VolumeKind::Intensity).unwrap();
    v.set(hx, hy, hz, 4.0);
    let (img, prov) = project_mip(&v, 90.0, Interpolation::Linear).unwrap();

    // forward transform of the voxel center into canvas coordinates
    let (cols, _) = canvas_size(12, 12);
    let (c, s) = (0.0f64, 1.0f64);
    let (dx, dy) = (hx as f64 - 5.5, hy as f64 - 5.5);
    let u = c * dx + s * dy;
    let col = (u + (cols as f64 - 1.0) / 2.0) as usize;

    let hot: Vec<usize> = (0..img.data.len()).filter(|&p| img.data[p] != 0.0).collect();
    assert_eq!(hot, vec![hz * img.cols + col]);
    assert_eq!(prov.voxel(hz, col), Some([hx, hy, hz]));
}

#[test]
fn rejects_bad_inputs() {
    let dims = Dims::new(3, 3, 3);
    let v = random_volume(dims, 1);
    assert!(project_mip(&v, f64::NAN, Interpolation::Linear).is_err());
    let labels = Volume3D::labels(dims, Spacing::default(), vec![0.0; 27]).unwrap();
    assert!(matches!(
        project_mip(&labels, 0.0, Interpolation::Linear),
        Err(Error::InvalidParameter(_))
    ));
    assert!(project_mip(&labels, 0.0, Interpolation::Nearest).is_ok());
    assert!(project_labels(&v, &angular_plan(2).unwrap()).is_err());
}

#[test]
fn stack_of_one_equals_single_projection() {
    let v = random_volume(Dims::new(6, 5, 4), 3);
    let stack = project_stack(&v, &angular_plan(1).unwrap(), Interpolation::Linear).unwrap();
    let (img, prov) = project_mip(&v, 0.0, Interpolation::Linear).unwrap();
    assert_eq!(stack.images, vec![img]);
    assert_eq!(stack.provenance, Some(vec![prov]));
}

#[test]
fn stack_on_constant_volume() {
    let dims = Dims::new(8, 8, 2);
    let v = Volume3D::filled(dims, Spacing::default(), 1.5, VolumeKind::Intensity).unwrap();
    let stack = project_stack(&v, &angular_plan(16).unwrap(), Interpolation::Linear).unwrap();
    assert_eq!(stack.images.len(), 16);
    let provs = stack.provenance.as_ref().unwrap();
    for (img, prov) in stack.images.iter().zip(provs) {
        for p in 0..img.data.len() {
            if prov.voxel_at(p).is_some() {
                assert_eq!(img.data[p], 1.5);
            }
        }
    }
}

#[test]
fn stack_is_independent_of_execution() {
    let v = random_volume(Dims::new(13, 11, 5), 9);
    let plan = angular_plan(8).unwrap();
    let seq = project_stack_with(&v, &plan, Interpolation::Linear, Execution::Sequential).unwrap();
    let par = project_stack_with(&v, &plan, Interpolation::Linear, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    let more = project_stack(&v, &angular_plan(16).unwrap(), Interpolation::Linear).unwrap();
    // angles of the 8-plan are a subset of the 16-plan, and unaffected by it
    for (k, img) in seq.images.iter().enumerate() {
        assert_eq!(img, &more.images[2 * k]);
    }
}

#[test]
fn label_projection_cases() {
    let dims = Dims::new(6, 6, 3);
    let plan = angular_plan(4).unwrap();
    let zeros = Volume3D::labels(dims, Spacing::default(), vec![0.0; dims.len()]).unwrap();
    let s = project_labels(&zeros, &plan).unwrap();
    assert!(s.images.iter().all(|m| m.data.iter().all(|&x| x == 0.0)));
    assert!(s.provenance.is_none());
    assert_eq!(s.kind(), MipKind::Label);

    let ones = Volume3D::labels(dims, Spacing::default(), vec![1.0; dims.len()]).unwrap();
    let s1 = project_labels(&ones, &plan).unwrap();
    let ref_stack = project_stack(&ones, &plan, Interpolation::Nearest).unwrap();
    for (img, prov) in s1.images.iter().zip(ref_stack.provenance.unwrap()) {
        for p in 0..img.data.len() {
            assert_eq!(img.data[p], if prov.voxel_at(p).is_some() { 1.0 } else { 0.0 });
        }
    }

    let mut one = zeros.clone();
    one.set(4, 1, 2, 1.0);
    let s = project_labels(&one, &angular_plan(1).unwrap()).unwrap();
    let img = &s.images[0];
    let set: Vec<usize> = (0..img.data.len()).filter(|&p| img.data[p] == 1.0).collect();
    let off = (img.cols - 6) / 2;
    assert_eq!(set, vec![2 * img.cols + 4 + off]);
}

#[test]
fn mirror_cases() {
    let m = MipImage::new(2, 2, vec![1.0, 2.0, 3.0, 4.0], 30.0, MipKind::Intensity).unwrap();
    let r = mirror(&m);
    assert_eq!(r.data, vec![2.0, 1.0, 4.0, 3.0]);
    assert_eq!(r.angle_deg, 210.0);
    assert_eq!(mirror(&r), m);
    let narrow = MipImage::new(3, 1, vec![1.0, 2.0, 3.0], 0.0, MipKind::Label).unwrap();
    assert_eq!(mirror(&narrow).data, narrow.data);
}

#[test]
fn anisotropic_volume_resamples_and_maps_back() {
    // sx = 2 mm, sy = 1 mm: the 4-voxel x extent becomes 7 grid columns
    let dims = Dims::new(4, 5, 2);
    let sp = Spacing::new(2.0, 1.0, 3.0).unwrap();
    let mut v = Volume3D::filled(dims, sp, 0.0, VolumeKind::Intensity).unwrap();
    v.set(3, 2, 1, 9.0);
    let (img, prov) = project_mip(&v, 0.0, Interpolation::Nearest).unwrap();
    assert_eq!(img.cols, canvas_size(7, 5).0);
    // grid columns 5 and 6 both resample from source x = 3
    let hot: Vec<usize> = (0..img.data.len()).filter(|&p| img.data[p] == 9.0).collect();
    assert_eq!(hot.len(), 2);
    assert!(hot.iter().all(|&p| prov.voxel_at(p) == Some([3, 2, 1])));
    for p in 0..img.data.len() {
        if let Some([x, y, z]) = prov.voxel_at(p) {
            assert_eq!(v.get(x, y, z), img.data[p]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bounds_and_provenance(seed in any::<u64>(), angle in 0.0f64..360.0, nx in 2usize..10, ny in 2usize..10) {
        let v = random_volume(Dims::new(nx, ny, 3), seed);
        let (lo, hi) = v.data().iter().fold((f32::MAX, f32::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        for interp in [Interpolation::Linear, Interpolation::Nearest] {
            let (img, prov) = project_mip(&v, angle, interp).unwrap();
            for p in 0..img.data.len() {
                match prov.voxel_at(p) {
                    Some([x, y, z]) => {
                        prop_assert!(x < nx && y < ny && z < 3);
                        prop_assert!(img.data[p] >= lo && img.data[p] <= hi);
                        if interp == Interpolation::Nearest {
                            prop_assert_eq!(v.get(x, y, z), img.data[p]);
                        } else {
                            // within the variation of the 3x3x3 neighborhood
                            let mut nlo = f32::MAX;
                            let mut nhi = f32::MIN;
                            for zz in z.saturating_sub(1)..(z + 2).min(3) {
                                for yy in y.saturating_sub(1)..(y + 2).min(ny) {
                                    for xx in x.saturating_sub(1)..(x + 2).min(nx) {
                                        nlo = nlo.min(v.get(xx, yy, zz));
                                        nhi = nhi.max(v.get(xx, yy, zz));
                                    }
                                }
                            }
                            prop_assert!((v.get(x, y, z) - img.data[p]).abs() <= nhi - nlo + 1e-6);
                        }
                    }
                    None => prop_assert_eq!(img.data[p], 0.0),
                }
            }
        }
    }

    #[test]
    fn projection_is_monotone(seed in any::<u64>(), angle in 0.0f64..180.0) {
        let dims = Dims::new(7, 6, 2);
        let a = random_volume(dims, seed);
        let b_data: Vec<f32> = a.data().iter().enumerate().map(|(i, x)| x + (i % 3) as f32 * 0.5).collect();
        let b = Volume3D::intensity(dims, Spacing::default(), b_data).unwrap();
        for interp in [Interpolation::Linear, Interpolation::Nearest] {
            let (ia, _) = project_mip(&a, angle, interp).unwrap();
            let (ib, _) = project_mip(&b, angle, interp).unwrap();
            prop_assert!(ia.data.iter().zip(&ib.data).all(|(x, y)| x <= y));
        }
    }

    #[test]
    fn opposite_view_is_mirror(seed in any::<u64>(), angle in 0.0f64..180.0) {
        let v = random_volume(Dims::new(9, 8, 2), seed);
        for interp in [Interpolation::Linear, Interpolation::Nearest] {
            let (front, _) = project_mip(&v, angle, interp).unwrap();
            let (back, _) = project_mip(&v, angle + 180.0, interp).unwrap();
            let m = mirror(&front);
            if interp == Interpolation::Nearest {
                prop_assert_eq!(&back.data, &m.data);
            } else {
                for (x, y) in back.data.iter().zip(&m.data) {
                    prop_assert!((x - y).abs() <= 1e-4 * x.abs().max(y.abs()));
                }
            }
        }
    }
}
