#![allow(dead_code)]

pub mod oracle;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tumorseg_core::{Dims, LabelVolume, Mask, ProbVolume, VolumeMeta};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_dims(r: &mut ChaCha8Rng, lo: usize, hi: usize) -> Dims {
    Dims::new(
        r.random_range(lo..=hi),
        r.random_range(lo..=hi),
        r.random_range(lo..=hi),
    )
}

pub fn random_mask(r: &mut ChaCha8Rng, dims: Dims, density: f64) -> Mask {
    Mask::from_fn(dims, |_| r.random::<f64>() < density)
}

/// Inclusive box `[lo, hi]` per axis.
pub fn fill_box(mask: &mut Mask, lo: [usize; 3], hi: [usize; 3]) {
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                mask.set_xyz(x, y, z, true);
            }
        }
    }
}

/// A random axis-aligned box fitting in `dims` with edges in `min_edge..=max_edge`.
pub fn random_box(
    r: &mut ChaCha8Rng,
    dims: Dims,
    min_edge: usize,
    max_edge: usize,
) -> ([usize; 3], [usize; 3]) {
    let d = dims.as_array();
    let mut lo = [0; 3];
    let mut hi = [0; 3];
    for a in 0..3 {
        let edge = r.random_range(min_edge..=max_edge.min(d[a]));
        lo[a] = r.random_range(0..=d[a] - edge);
        hi[a] = lo[a] + edge - 1;
    }
    (lo, hi)
}

/// Random per-voxel distributions over `channels` classes.
pub fn random_probs(r: &mut ChaCha8Rng, dims: Dims, channels: usize) -> ProbVolume {
    let n = dims.len();
    let mut probs = vec![0.0; n * channels];
    for v in 0..n {
        let raw: Vec<f64> = (0..channels).map(|_| r.random::<f64>() + 1e-3).collect();
        let s: f64 = raw.iter().sum();
        for (c, x) in raw.iter().enumerate() {
            probs[c * n + v] = x / s;
        }
    }
    ProbVolume::new(VolumeMeta::unit(dims, "rand").unwrap(), channels, probs).unwrap()
}

pub fn labels_from(dims: Dims, voxels: Vec<u8>) -> LabelVolume {
    LabelVolume::new(VolumeMeta::unit(dims, "case").unwrap(), 4, voxels).unwrap()
}

/// Random labels made of a few overlapping boxes of classes 1..=3.
pub fn random_labels(r: &mut ChaCha8Rng, dims: Dims, boxes: usize) -> LabelVolume {
    let mut voxels = vec![0u8; dims.len()];
    for _ in 0..boxes {
        let (lo, hi) = random_box(r, dims, 1, 6);
        let class = r.random_range(1..=3u8);
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    voxels[dims.index(x, y, z)] = class;
                }
            }
        }
    }
    labels_from(dims, voxels)
}

/// A random lesion-wise case with 0–4 boxes per side: prediction boxes are
/// jittered copies of some ground-truth boxes, topped up with unrelated ones.
pub fn random_lesion_case(r: &mut ChaCha8Rng, dims: Dims) -> (Mask, Mask) {
    let mut gt = Mask::empty(dims);
    let mut pred = Mask::empty(dims);
    let d = dims.as_array();
    let n_gt = r.random_range(0..=4usize);
    let n_pred = r.random_range(0..=4usize);
    let mut placed = 0;
    for _ in 0..n_gt {
        let (lo, hi) = random_box(r, dims, 2, 7);
        fill_box(&mut gt, lo, hi);
        if placed < n_pred && r.random::<f64>() < 0.7 {
            let mut plo = lo;
            let mut phi = hi;
            for a in 0..3 {
                let shift = r.random_range(-2i64..=2);
                plo[a] = (lo[a] as i64 + shift).clamp(0, d[a] as i64 - 1) as usize;
                phi[a] = (hi[a] as i64 + shift + r.random_range(-1i64..=1))
                    .clamp(plo[a] as i64, d[a] as i64 - 1) as usize;
            }
            fill_box(&mut pred, plo, phi);
            placed += 1;
        }
    }
    for _ in placed..n_pred {
        let (lo, hi) = random_box(r, dims, 2, 7);
        fill_box(&mut pred, lo, hi);
    }
    (pred, gt)
}
