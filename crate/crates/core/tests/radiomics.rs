mod common;

use common::oracles;
use ndarray::Array3;
use proptest::prelude::*;
use std::collections::BTreeMap;
use volnorm::radiomics::*;
use volnorm::volume::{Mask3D, Orientation, Volume3D};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn features_match_brute_force_oracles() {
    for seed in 0..50 {
        let (v, m) = oracles::random_masked_volume(seed);
        let c = centroid(&m).unwrap();
        let co = oracles::centroid(&m);
        for a in 0..3 {
            assert!(close(c[a], co[a], 1e-12), "seed {seed} centroid");
        }

        let sh = shape_features(&m).unwrap();
        let (vo, ao, so) = oracles::shape(&m);
        assert!(close(sh.volume, vo, 1e-9) && close(sh.surface_area, ao, 1e-9) && close(sh.sphericity, so, 1e-9), "seed {seed} shape");

        let fo = first_order(&v, &m).unwrap();
        let fo_ref = oracles::first_order(&v, &m);
        for (got, want) in [fo.energy, fo.total_energy, fo.entropy, fo.mean, fo.variance].iter().zip(fo_ref) {
            assert!(close(*got, want, 1e-9), "seed {seed} first order {got} vs {want}");
        }

        let counts = oracles::glcm_counts(&v, &m, DEFAULT_LEVELS, &DIRECTIONS_13);
        match glcm(&v, &m, DEFAULT_LEVELS) {
            Ok(g) => {
                for i in 0..DEFAULT_LEVELS {
                    for j in 0..DEFAULT_LEVELS {
                        assert_eq!(g.counts[[i, j]], counts[i][j], "seed {seed} glcm ({i},{j})");
                    }
                }
                let f = glcm_features(&g);
                let want = oracles::glcm_features(&counts);
                for (got, want) in [f.contrast, f.correlation, f.asm, f.idm].iter().zip(want) {
                    assert!(close(*got, want, 1e-9), "seed {seed} glcm feature {got} vs {want}");
                }
            }
            Err(RadiomicsError::DegenerateRegion(_)) => assert_eq!(counts.iter().flatten().sum::<f64>(), 0.0),
            Err(e) => panic!("seed {seed}: {e}"),
        }

        let runs = oracles::glrlm_counts(&v, &m, DEFAULT_LEVELS, &DIRECTIONS_13);
        let r = glrlm(&v, &m, DEFAULT_LEVELS).unwrap();
        for (l, row) in runs.iter().enumerate() {
            for (j, &want) in row.iter().enumerate() {
                assert_eq!(r.counts[[l, j]], want, "seed {seed} glrlm ({l},{j})");
            }
        }
        let f = glrlm_features(&r);
        let want = oracles::glrlm_features(&runs);
        assert!(close(f.sre, want[0], 1e-9) && close(f.lre, want[1], 1e-9), "seed {seed} glrlm features");
    }
}

#[test]
fn sphericity_hand_cases() {
    let one = Mask3D::new(Array3::from_elem((1, 1, 1), 1), [1.0; 3]).unwrap();
    let s = shape_features(&one).unwrap();
    assert_eq!((s.volume, s.surface_area), (1.0, 6.0));
    assert!((s.sphericity - 0.805_996).abs() < 1e-4);

    let cube = Mask3D::new(Array3::from_elem((2, 2, 2), 1), [1.0; 3]).unwrap();
    let s = shape_features(&cube).unwrap();
    assert_eq!((s.volume, s.surface_area), (8.0, 24.0));
    // voxel cubes of any size share the single-voxel sphericity
    assert!((s.sphericity - 0.805_996).abs() < 1e-4);

    let rod = Mask3D::new(Array3::from_elem((1, 1, 2), 1), [1.0; 3]).unwrap();
    let s = shape_features(&rod).unwrap();
    assert_eq!(s.surface_area, 10.0);
    assert!((s.sphericity - std::f64::consts::PI.cbrt() * 12f64.powf(2.0 / 3.0) / 10.0).abs() < 1e-12);

    // anisotropic spacing scales volume and faces
    let one = Mask3D::new(Array3::from_elem((1, 1, 1), 1), [2.0, 1.0, 1.0]).unwrap();
    let s = shape_features(&one).unwrap();
    assert_eq!((s.volume, s.surface_area), (2.0, 10.0));
}

#[test]
fn extraction_covers_all_modalities() {
    let (v, m) = oracles::random_masked_volume(7);
    let mut vols = BTreeMap::new();
    for name in MODALITIES {
        vols.insert(name.to_string(), v.clone().with_modality(name));
    }
    let mask = Mask3D::new(Array3::from_elem(v.data().raw_dim(), 1), m.spacing()).unwrap();
    let fv = extract_all(&vols, &mask).unwrap();
    assert_eq!(fv.len(), N_FEATURES);
    assert_eq!(fv.get("FLAIR_Mean"), fv.get("T2w_Mean"));
    vols.remove("T2w");
    assert_eq!(extract_all(&vols, &mask), Err(RadiomicsError::MissingModality("T2w".into())));
}

fn mask_strategy() -> impl Strategy<Value = (Vec<u8>, Vec<u8>)> {
    (proptest::collection::vec(0u8..2, 64), proptest::collection::vec(0u8..2, 64))
}

fn to_mask(v: Vec<u8>) -> Mask3D {
    Mask3D::new(Array3::from_shape_vec((4, 4, 4), v).unwrap(), [1.0; 3]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn overlap_identities((a, b) in mask_strategy()) {
        let (a, b) = (to_mask(a), to_mask(b));
        let (i, d) = (iou(&a, &b).unwrap(), dice(&a, &b).unwrap());
        prop_assert!(d >= i - 1e-15);
        prop_assert!((0.0..=1.0).contains(&i) && (0.0..=1.0).contains(&d));
        prop_assert!((d - 2.0 * i / (1.0 + i)).abs() < 1e-12);
        prop_assert_eq!(iou(&a, &a).unwrap(), 1.0);
        prop_assert_eq!(dice(&b, &b).unwrap(), 1.0);
        prop_assert_eq!(iou(&a, &b).unwrap(), iou(&b, &a).unwrap());
    }

    #[test]
    fn texture_invariants(vals in proptest::collection::vec(0.0f32..100.0, 27), bits in proptest::collection::vec(0u8..2, 27)) {
        prop_assume!(bits.iter().any(|&b| b == 1));
        let v = Volume3D::new(Array3::from_shape_vec((3, 3, 3), vals).unwrap(), [1.0; 3], Orientation::Axial, "synthetic").unwrap();
        let m = Mask3D::new(Array3::from_shape_vec((3, 3, 3), bits).unwrap(), [1.0; 3]).unwrap();
        if let Ok(g) = glcm(&v, &m, 8) {
            prop_assert_eq!(&g.counts, &g.counts.t());
            let f = glcm_features(&g);
            prop_assert!(f.asm > 0.0 && f.asm <= 1.0 + 1e-12);
            prop_assert!(f.idm > 0.0 && f.idm <= 1.0 + 1e-12);
            prop_assert!(f.contrast >= 0.0);
            prop_assert!(f.correlation >= -1.0 - 1e-9 && f.correlation <= 1.0 + 1e-9);
        }
        let r = glrlm(&v, &m, 8).unwrap();
        let f = glrlm_features(&r);
        prop_assert!(f.sre > 0.0 && f.sre <= 1.0);
        prop_assert!(f.lre >= 1.0);
        // each direction covers every masked voxel exactly once
        let voxels: f64 = r.counts.indexed_iter().map(|((_, j), &c)| c * (j + 1) as f64).sum();
        prop_assert_eq!(voxels, 13.0 * m.count() as f64);
    }

    #[test]
    fn centroid_is_translation_equivariant(bits in proptest::collection::vec(0u8..2, 27), shift in 0usize..3) {
        prop_assume!(bits.iter().any(|&b| b == 1));
        let small = Array3::from_shape_vec((3, 3, 3), bits).unwrap();
        let mut big = Array3::zeros((6, 3, 3));
        big.slice_mut(ndarray::s![shift..shift + 3, .., ..]).assign(&small);
        let a = centroid(&Mask3D::new(small, [1.0; 3]).unwrap()).unwrap();
        let b = centroid(&Mask3D::new(big, [1.0; 3]).unwrap()).unwrap();
        prop_assert!((b[0] - a[0] - shift as f64).abs() < 1e-12);
        prop_assert!((b[1] - a[1]).abs() < 1e-12 && (b[2] - a[2]).abs() < 1e-12);
    }
}
