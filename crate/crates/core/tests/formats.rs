//! File round-trips through the filesystem.

use mip_core::io::container::{decode, encode_provenance, encode_stack};
use mip_core::io::nifti::{decode_nifti, encode_nifti};
use mip_core::io::{self, AxisMap, MipContainer};
use mip_core::phantom::{generate, PhantomSpec, SphereSpec};
use mip_core::projection::{project_labels, project_stack};
use mip_core::{AngularPlan, Dims, Interpolation, Spacing, Volume3D};
use proptest::prelude::*;

fn volume(nx: usize, ny: usize, nz: usize, seed: u64) -> Volume3D {
    let data = (0..nx * ny * nz)
        .map(|i| ((i as u64).wrapping_mul(6364136223846793005).wrapping_add(seed) >> 40) as f32 / 7.0 - 100.0)
        .collect();
    Volume3D::intensity(Dims::new(nx, ny, nz), Spacing::new(0.75, 1.25, 2.5).unwrap(), data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nifti_files_roundtrip(nx in 1usize..9, ny in 1usize..9, nz in 1usize..6, seed in any::<u64>(), gz in any::<bool>()) {
        let v = volume(nx, ny, nz, seed);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(if gz { "v.nii.gz" } else { "v.nii" });
        io::write_nifti(&v, &path).unwrap();
        let back = io::read_nifti(&path).unwrap();
        prop_assert_eq!(&back, &v);
        let raw = std::fs::read(&path).unwrap();
        prop_assert_eq!(raw[..2] == [0x1f, 0x8b], gz);
        io::write_nifti(&back, dir.path().join("again.nii.gz")).unwrap();
        if gz {
            prop_assert_eq!(std::fs::read(dir.path().join("again.nii.gz")).unwrap(), raw);
        }
    }

    #[test]
    fn projected_stacks_roundtrip(n in 1usize..5, nx in 2usize..8, ny in 2usize..8, seed in any::<u64>()) {
        let v = volume(nx, ny, 3, seed);
        let plan = AngularPlan::new(n).unwrap();
        let s = project_stack(&v, &plan, Interpolation::Linear).unwrap();
        let bytes = encode_stack(&s).unwrap();
        let MipContainer::Stack(back) = decode(&bytes).unwrap() else { panic!("kind") };
        prop_assert_eq!(&back.images, &s.images);
        prop_assert_eq!(encode_stack(&back).unwrap(), bytes);

        let prov = s.provenance.as_ref().unwrap();
        let pbytes = encode_provenance(&plan, prov).unwrap();
        let MipContainer::Provenance(pback) = decode(&pbytes).unwrap() else { panic!("kind") };
        prop_assert_eq!(&pback.maps, prov);
    }
}

#[test]
fn label_volumes_roundtrip_as_u8() {
    let spec = PhantomSpec::new(Dims::new(12, 10, 6), 1.0).with_sphere(SphereSpec::tumor([5.0, 5.0, 3.0], 2.5, 4.0));
    let (_, labels) = generate(&spec).unwrap();
    let bytes = encode_nifti(&labels).unwrap();
    assert_eq!(bytes.len(), 352 + 12 * 10 * 6);
    let (back, _) = decode_nifti(&bytes, AxisMap::default()).unwrap();
    assert_eq!(back.into_labels().unwrap(), labels);

    let plan = AngularPlan::new(3).unwrap();
    let ann = project_labels(&labels, &plan).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("labels.mips");
    io::write_stack(&ann, &p).unwrap();
    assert_eq!(io::read_stack(&p).unwrap(), ann);
    assert!(io::read_provenance(&p).is_err());
}

#[test]
fn missing_file_names_the_path() {
    let err = io::read_nifti("/definitely/not/here.nii").unwrap_err();
    assert!(err.to_string().contains("/definitely/not/here.nii"));
}
