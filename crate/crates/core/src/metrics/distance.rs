//! Surface distances between binary masks.
//!
//! Surfaces are the foreground voxels with at least one face-adjacent
//! background or out-of-volume neighbour. Distances are Euclidean in
//! millimetres, measured between voxel centres.

use crate::components::Connectivity;
use crate::volume::{Dims, Mask};

/// Above this many surface voxels on either side, nearest distances come from
/// a Euclidean distance transform instead of pairwise search.
pub const BRUTE_FORCE_LIMIT: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceMethod {
    /// Pairwise search for small surfaces, distance transform otherwise.
    Auto,
    BruteForce,
    DistanceTransform,
}

/// Flat indices of the surface voxels of `mask`.
pub fn surface_voxels(mask: &Mask) -> Vec<usize> {
    let dims = mask.dims();
    let offsets = Connectivity::Face6.offsets();
    mask.iter_set()
        .filter(|&i| {
            let c = dims.coords(i);
            offsets
                .iter()
                .any(|&d| dims.offset(c, d).is_none_or(|j| !mask.get(j)))
        })
        .collect()
}

/// For each voxel in `from`, the distance to the nearest voxel in `to`.
pub fn nearest_distances(
    from: &[usize],
    to: &[usize],
    dims: Dims,
    spacing: [f64; 3],
    method: DistanceMethod,
) -> Vec<f64> {
    if to.is_empty() {
        return vec![f64::INFINITY; from.len()];
    }
    let brute = match method {
        DistanceMethod::BruteForce => true,
        DistanceMethod::DistanceTransform => false,
        DistanceMethod::Auto => from.len().max(to.len()) <= BRUTE_FORCE_LIMIT,
    };
    if brute {
        nearest_brute_force(from, to, dims, spacing)
    } else {
        let sq = squared_edt(to, dims, spacing);
        from.iter().map(|&i| sq[i].sqrt()).collect()
    }
}

fn nearest_brute_force(from: &[usize], to: &[usize], dims: Dims, spacing: [f64; 3]) -> Vec<f64> {
    let to_mm: Vec<[f64; 3]> = to.iter().map(|&j| position(dims, spacing, j)).collect();
    from.iter()
        .map(|&i| {
            let a = position(dims, spacing, i);
            to_mm
                .iter()
                .map(|b| {
                    let dx = a[0] - b[0];
                    let dy = a[1] - b[1];
                    let dz = a[2] - b[2];
                    dx * dx + dy * dy + dz * dz
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}

fn position(dims: Dims, spacing: [f64; 3], i: usize) -> [f64; 3] {
    let (x, y, z) = dims.coords(i);
    [
        x as f64 * spacing[0],
        y as f64 * spacing[1],
        z as f64 * spacing[2],
    ]
}

/// Exact squared Euclidean distance (mm²) from every voxel to the nearest
/// seed, by separable lower-envelope passes along x, y and z.
pub fn squared_edt(seeds: &[usize], dims: Dims, spacing: [f64; 3]) -> Vec<f64> {
    let mut f = vec![f64::INFINITY; dims.len()];
    for &s in seeds {
        f[s] = 0.0;
    }
    let [nx, ny, nz] = dims.as_array();
    let mut line = Vec::new();
    let mut out = Vec::new();

    for z in 0..nz {
        for y in 0..ny {
            let base = dims.index(0, y, z);
            line.clear();
            line.extend((0..nx).map(|x| f[base + x]));
            envelope_1d(&line, spacing[0], &mut out);
            f[base..base + nx].copy_from_slice(&out[..nx]);
        }
    }
    for z in 0..nz {
        for x in 0..nx {
            line.clear();
            line.extend((0..ny).map(|y| f[dims.index(x, y, z)]));
            envelope_1d(&line, spacing[1], &mut out);
            for y in 0..ny {
                f[dims.index(x, y, z)] = out[y];
            }
        }
    }
    for y in 0..ny {
        for x in 0..nx {
            line.clear();
            line.extend((0..nz).map(|z| f[dims.index(x, y, z)]));
            envelope_1d(&line, spacing[2], &mut out);
            for z in 0..nz {
                f[dims.index(x, y, z)] = out[z];
            }
        }
    }
    f
}

/// 1D squared distance transform of sampled function `f` with sample pitch
/// `step`: `out[p] = min_q ((p - q) * step)^2 + f[q]`.
fn envelope_1d(f: &[f64], step: f64, out: &mut Vec<f64>) {
    let n = f.len();
    out.clear();
    out.resize(n, f64::INFINITY);
    // Parabola apexes (sample indices) and the boundaries between them.
    let mut apex: Vec<usize> = Vec::with_capacity(n);
    let mut bound: Vec<f64> = Vec::with_capacity(n + 1);
    let pos = |q: usize| q as f64 * step;
    let intersect = |a: usize, b: usize| -> f64 {
        let (pa, pb) = (pos(a), pos(b));
        ((f[b] + pb * pb) - (f[a] + pa * pa)) / (2.0 * (pb - pa))
    };

    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        while let Some(&last) = apex.last() {
            let s = intersect(last, q);
            if s <= *bound.last().unwrap() {
                apex.pop();
                bound.pop();
            } else {
                break;
            }
        }
        let s = match apex.last() {
            Some(&last) => intersect(last, q),
            None => f64::NEG_INFINITY,
        };
        apex.push(q);
        bound.push(s);
    }
    if apex.is_empty() {
        return;
    }
    let mut k = 0;
    for (p, o) in out.iter_mut().enumerate() {
        let x = pos(p);
        while k + 1 < apex.len() && bound[k + 1] < x {
            k += 1;
        }
        let d = x - pos(apex[k]);
        *o = d * d + f[apex[k]];
    }
}

/// Percentile with linear interpolation between closest ranks; `q` in `[0, 100]`.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of an empty set");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let h = (v.len() - 1) as f64 * q / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// 95th-percentile Hausdorff distance in mm: the larger of the two directed
/// 95th percentiles of surface-to-surface nearest distances.
///
/// Both empty gives `0.0`; exactly one empty gives `f64::INFINITY`, which
/// callers translate into their penalty value.
pub fn hd95(pred: &Mask, gt: &Mask, spacing: [f64; 3]) -> f64 {
    hd95_with(pred, gt, spacing, DistanceMethod::Auto)
}

pub fn hd95_with(pred: &Mask, gt: &Mask, spacing: [f64; 3], method: DistanceMethod) -> f64 {
    assert_eq!(pred.dims(), gt.dims(), "hd95 masks must share dimensions");
    let sp = surface_voxels(pred);
    let sg = surface_voxels(gt);
    match (sp.is_empty(), sg.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return f64::INFINITY,
        _ => {}
    }
    let dims = pred.dims();
    let forward = nearest_distances(&sp, &sg, dims, spacing, method);
    let backward = nearest_distances(&sg, &sp, dims, spacing, method);
    percentile(&forward, 95.0).max(percentile(&backward, 95.0))
}
