mod common;

use proptest::prelude::*;
use tumorseg_core::components::connected_components;
use tumorseg_core::postprocess::{morph_smooth, postprocess, size_filter};
use tumorseg_core::{Connectivity, Dims, PostprocessConfig};

fn cfg(min: usize, conn: Connectivity) -> PostprocessConfig {
    PostprocessConfig {
        min_component_voxels: min,
        connectivity: conn,
        ..PostprocessConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn size_filter_is_idempotent_and_only_removes(
        seed in any::<u64>(),
        min in 0usize..40,
        conn in prop_oneof![Just(Connectivity::Face6), Just(Connectivity::Edge18), Just(Connectivity::Vertex26)],
    ) {
        let mut r = common::rng(seed);
        let dims = common::random_dims(&mut r, 4, 12);
        let l = common::random_labels(&mut r, dims, 8);
        let c = cfg(min, conn);
        let once = size_filter(&l, &c).unwrap();
        prop_assert_eq!(&size_filter(&once, &c).unwrap(), &once);
        for (a, b) in l.voxels().iter().zip(once.voxels()) {
            prop_assert!(*b == *a || *b == 0);
        }
        for class in 1..4u8 {
            let cm = connected_components(&once.class_mask(class), conn);
            prop_assert!(cm.voxel_counts().iter().all(|&n| n >= min));
        }
    }

    #[test]
    fn smoothing_keeps_labels_in_range(seed in any::<u64>()) {
        let mut r = common::rng(seed);
        let dims = common::random_dims(&mut r, 5, 10);
        let l = common::random_labels(&mut r, dims, 6);
        let out = postprocess(&l, &cfg(5, Connectivity::Vertex26)).unwrap();
        prop_assert!(out.voxels().iter().all(|&v| v < 4));
        prop_assert_eq!(out.meta(), l.meta());
    }
}

#[test]
fn zero_settings_are_identity() {
    let mut r = common::rng(4);
    let l = common::random_labels(&mut r, Dims::cube(9), 6);
    let c = PostprocessConfig {
        min_component_voxels: 0,
        smooth_iterations: 0,
        ..PostprocessConfig::default()
    };
    assert_eq!(postprocess(&l, &c).unwrap(), l);
}

#[test]
fn interior_hole_is_filled() {
    let dims = Dims::cube(9);
    let voxels = (0..dims.len())
        .map(|i| {
            let (x, y, z) = dims.coords(i);
            let inside = [x, y, z].iter().all(|c| (1..8).contains(c));
            (inside && (x, y, z) != (4, 4, 4)) as u8 * 3
        })
        .collect();
    let l = common::labels_from(dims, voxels);
    assert_eq!(l.class_mask(3).count(), 342);
    let out = morph_smooth(&l, &PostprocessConfig::default()).unwrap();
    assert_eq!(out.get(4, 4, 4), 3);
    assert_eq!(out.class_mask(3).count(), 343);
}

#[test]
fn bad_priority_is_a_config_error() {
    let l = common::labels_from(Dims::cube(3), vec![0; 27]);
    let c = PostprocessConfig {
        class_priority: vec![1, 1, 3],
        ..PostprocessConfig::default()
    };
    let err = morph_smooth(&l, &c).unwrap_err().to_string();
    assert!(err.contains("class_priority"), "{err}");
}
