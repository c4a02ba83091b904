//! Straight-line reference implementations used to check the library.
//!
//! Nothing here calls into the library's algorithms; only plain data types
//! (`Dims`, `Mask`, volumes) are shared.

#![allow(dead_code)]

use std::collections::VecDeque;

use tumorseg_core::{Connectivity, Dims, LabelVolume, Mask, ProbVolume};

/// Whether two distinct voxels are adjacent under `conn`.
pub fn adjacent(conn: Connectivity, a: (usize, usize, usize), b: (usize, usize, usize)) -> bool {
    let d = [
        a.0 as i64 - b.0 as i64,
        a.1 as i64 - b.1 as i64,
        a.2 as i64 - b.2 as i64,
    ];
    if d.iter().any(|v| v.abs() > 1) || d == [0, 0, 0] {
        return false;
    }
    let nonzero = d.iter().filter(|v| **v != 0).count();
    match conn {
        Connectivity::Face6 => nonzero == 1,
        Connectivity::Edge18 => nonzero <= 2,
        Connectivity::Vertex26 => true,
    }
}

fn neighbours(dims: Dims, conn: Connectivity, i: usize) -> Vec<usize> {
    let (x, y, z) = dims.coords(i);
    let mut out = Vec::new();
    for nz in z.saturating_sub(1)..=(z + 1).min(dims.nz - 1) {
        for ny in y.saturating_sub(1)..=(y + 1).min(dims.ny - 1) {
            for nx in x.saturating_sub(1)..=(x + 1).min(dims.nx - 1) {
                if adjacent(conn, (x, y, z), (nx, ny, nz)) {
                    out.push(dims.index(nx, ny, nz));
                }
            }
        }
    }
    out
}

/// BFS labelling; ids assigned in order of first voxel in flat index order.
pub fn bfs_components(mask: &Mask, conn: Connectivity) -> (Vec<u32>, usize) {
    let dims = mask.dims();
    let mut ids = vec![0u32; dims.len()];
    let mut next = 0u32;
    for start in 0..dims.len() {
        if !mask.get(start) || ids[start] != 0 {
            continue;
        }
        next += 1;
        ids[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for j in neighbours(dims, conn, i) {
                if mask.get(j) && ids[j] == 0 {
                    ids[j] = next;
                    queue.push_back(j);
                }
            }
        }
    }
    (ids, next as usize)
}

pub fn histogram(ids: &[u32], count: usize) -> Vec<usize> {
    let mut h = vec![0; count];
    for &id in ids {
        if id > 0 {
            h[id as usize - 1] += 1;
        }
    }
    h
}

/// Graph distance of a displacement under `conn` (unbounded grid).
fn steps(conn: Connectivity, d: [i64; 3]) -> i64 {
    let a = d.map(|v| v.abs());
    let cheb = *a.iter().max().unwrap();
    let l1: i64 = a.iter().sum();
    match conn {
        Connectivity::Face6 => l1,
        Connectivity::Vertex26 => cheb,
        Connectivity::Edge18 => cheb.max((l1 + 1) / 2),
    }
}

/// Dilation by brute force: a voxel is set iff some set voxel lies within
/// `iterations` adjacency steps.
pub fn brute_dilate(mask: &Mask, iterations: usize, conn: Connectivity) -> Mask {
    let dims = mask.dims();
    let set: Vec<(usize, usize, usize)> = mask.iter_set().map(|i| dims.coords(i)).collect();
    Mask::from_fn(dims, |i| {
        let (x, y, z) = dims.coords(i);
        set.iter().any(|&(a, b, c)| {
            steps(
                conn,
                [
                    x as i64 - a as i64,
                    y as i64 - b as i64,
                    z as i64 - c as i64,
                ],
            ) <= iterations as i64
        })
    })
}

/// Erosion through the duality with dilation, treating voxels outside the
/// volume as unset: pad, complement, dilate, complement, crop.
pub fn dual_erode(mask: &Mask, iterations: usize, conn: Connectivity) -> Mask {
    let dims = mask.dims();
    let p = iterations;
    let padded_dims = Dims::new(dims.nx + 2 * p, dims.ny + 2 * p, dims.nz + 2 * p);
    let padded_complement = Mask::from_fn(padded_dims, |i| {
        let (x, y, z) = padded_dims.coords(i);
        let inside = (p..p + dims.nx).contains(&x)
            && (p..p + dims.ny).contains(&y)
            && (p..p + dims.nz).contains(&z);
        !(inside && mask.get_xyz(x - p, y - p, z - p))
    });
    let grown = brute_dilate(&padded_complement, iterations, conn);
    Mask::from_fn(dims, |i| {
        let (x, y, z) = dims.coords(i);
        !grown.get_xyz(x + p, y + p, z + p)
    })
}

/// Components of `limit` that intersect `marker`, via BFS labelling.
pub fn select_components(marker: &Mask, limit: &Mask, conn: Connectivity) -> Mask {
    let (ids, count) = bfs_components(limit, conn);
    let mut keep = vec![false; count + 1];
    for i in marker.iter_set() {
        keep[ids[i] as usize] = true;
    }
    keep[0] = false;
    Mask::from_fn(limit.dims(), |i| keep[ids[i] as usize])
}

/// Foreground voxels with a face neighbour that is background or outside.
pub fn boundary(mask: &Mask) -> Vec<(usize, usize, usize)> {
    let dims = mask.dims();
    let mut out = Vec::new();
    for i in mask.iter_set() {
        let (x, y, z) = dims.coords(i);
        let mut edge = false;
        for (dx, dy, dz) in [
            (-1i64, 0i64, 0i64),
            (1, 0, 0),
            (0, -1, 0),
            (0, 1, 0),
            (0, 0, -1),
            (0, 0, 1),
        ] {
            let (nx, ny, nz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
            if nx < 0
                || ny < 0
                || nz < 0
                || nx >= dims.nx as i64
                || ny >= dims.ny as i64
                || nz >= dims.nz as i64
            {
                edge = true;
            } else if !mask.get_xyz(nx as usize, ny as usize, nz as usize) {
                edge = true;
            }
        }
        if edge {
            out.push((x, y, z));
        }
    }
    out
}

pub fn linear_percentile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = q / 100.0 * (values.len() - 1) as f64;
    let below = rank.floor() as usize;
    let frac = rank - below as f64;
    if below + 1 < values.len() {
        values[below] * (1.0 - frac) + values[below + 1] * frac
    } else {
        values[below]
    }
}

/// All-pairs HD95 with the library's empty-mask conventions.
pub fn all_pairs_hd95(a: &Mask, b: &Mask, spacing: [f64; 3]) -> f64 {
    let ba = boundary(a);
    let bb = boundary(b);
    if ba.is_empty() && bb.is_empty() {
        return 0.0;
    }
    if ba.is_empty() || bb.is_empty() {
        return f64::INFINITY;
    }
    let dist = |p: &(usize, usize, usize), q: &(usize, usize, usize)| {
        let dx = (p.0 as f64 - q.0 as f64) * spacing[0];
        let dy = (p.1 as f64 - q.1 as f64) * spacing[1];
        let dz = (p.2 as f64 - q.2 as f64) * spacing[2];
        (dx * dx + dy * dy + dz * dz).sqrt()
    };
    let matrix: Vec<Vec<f64>> = ba
        .iter()
        .map(|p| bb.iter().map(|q| dist(p, q)).collect())
        .collect();
    let mut ab: Vec<f64> = matrix
        .iter()
        .map(|row| row.iter().cloned().fold(f64::INFINITY, f64::min))
        .collect();
    let mut ba_min: Vec<f64> = (0..bb.len())
        .map(|j| {
            matrix
                .iter()
                .map(|row| row[j])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    linear_percentile(&mut ab, 95.0).max(linear_percentile(&mut ba_min, 95.0))
}

pub fn dice(a: &Mask, b: &Mask) -> f64 {
    let mut inter = 0usize;
    let mut na = 0usize;
    let mut nb = 0usize;
    for i in 0..a.dims().len() {
        na += a.get(i) as usize;
        nb += b.get(i) as usize;
        inter += (a.get(i) && b.get(i)) as usize;
    }
    if na + nb == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (na + nb) as f64
    }
}

pub struct LesionParams {
    pub dilation: usize,
    pub conn: Connectivity,
    pub min_voxels: usize,
    pub fp_dice: f64,
    pub fn_dice: f64,
    pub hd_penalty: f64,
}

impl Default for LesionParams {
    fn default() -> Self {
        LesionParams {
            dilation: 3,
            conn: Connectivity::Vertex26,
            min_voxels: 50,
            fp_dice: 0.0,
            fn_dice: 0.0,
            hd_penalty: 374.0,
        }
    }
}

/// Lesion-wise (dice, hd95, tp, fp, fn) computed on full-volume masks.
pub fn lesion_wise(
    pred: &Mask,
    gt: &Mask,
    spacing: [f64; 3],
    p: &LesionParams,
) -> (f64, f64, usize, usize, usize) {
    let dims = gt.dims();
    let (gids, gcount) = bfs_components(gt, p.conn);
    let (pids, pcount) = bfs_components(pred, p.conn);
    let gsize = histogram(&gids, gcount);
    let psize = histogram(&pids, pcount);

    let mut pred_used = vec![false; pcount + 1];
    let mut scores = Vec::new();
    let mut fn_count = 0;
    for g in 1..=gcount {
        if gsize[g - 1] < p.min_voxels {
            continue;
        }
        let lesion = Mask::from_fn(dims, |i| gids[i] == g as u32);
        let grown = brute_dilate(&lesion, p.dilation, p.conn);
        let mut hit = vec![false; pcount + 1];
        for i in 0..dims.len() {
            let id = pids[i] as usize;
            if grown.get(i) && id > 0 && psize[id - 1] >= p.min_voxels {
                hit[id] = true;
            }
        }
        if !hit.iter().any(|h| *h) {
            fn_count += 1;
            continue;
        }
        for (id, h) in hit.iter().enumerate() {
            if *h {
                pred_used[id] = true;
            }
        }
        let matched = Mask::from_fn(dims, |i| hit[pids[i] as usize]);
        scores.push((
            dice(&matched, &lesion),
            all_pairs_hd95(&matched, &lesion, spacing),
        ));
    }
    let fp_count = (1..=pcount)
        .filter(|&id| psize[id - 1] >= p.min_voxels && !pred_used[id])
        .count();
    let n = scores.len() + fp_count + fn_count;
    if n == 0 {
        return (1.0, 0.0, 0, 0, 0);
    }
    let mut dsum = 0.0;
    let mut hsum = 0.0;
    for (d, h) in &scores {
        dsum += d;
        hsum += h;
    }
    dsum += fp_count as f64 * p.fp_dice + fn_count as f64 * p.fn_dice;
    hsum += (fp_count + fn_count) as f64 * p.hd_penalty;
    (
        dsum / n as f64,
        hsum / n as f64,
        scores.len(),
        fp_count,
        fn_count,
    )
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

pub fn ce(p: &ProbVolume, g: &LabelVolume) -> f64 {
    let mut s = 0.0;
    for (v, &l) in g.voxels().iter().enumerate() {
        s -= p.get(v, l as usize).max(1e-7).ln();
    }
    s / g.voxels().len() as f64
}

fn sums(p: &[f64], t: &[f64]) -> (f64, f64, f64) {
    let i: f64 = p.iter().zip(t).map(|(a, b)| a * b).sum();
    (i, p.iter().sum(), t.iter().sum())
}

pub fn dice_loss(p: &[f64], t: &[f64]) -> f64 {
    let (i, a, b) = sums(p, t);
    1.0 - (2.0 * i + 1e-6) / (a + b + 1e-6)
}

pub fn jaccard_loss(p: &[f64], t: &[f64]) -> f64 {
    let (i, a, b) = sums(p, t);
    1.0 - (i + 1e-6) / (a + b - i + 1e-6)
}

pub fn bce(p: &[f64], t: &[f64]) -> f64 {
    let mut s = 0.0;
    for (a, b) in p.iter().zip(t) {
        s -= b * a.max(1e-7).ln() + (1.0 - b) * (1.0 - a).max(1e-7).ln();
    }
    s / p.len() as f64
}

pub fn one_hot_channel(g: &LabelVolume, class: usize) -> Vec<f64> {
    g.voxels()
        .iter()
        .map(|&l| if l as usize == class { 1.0 } else { 0.0 })
        .collect()
}

pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub scales: usize,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 7,
            sigma: 1.5,
            scales: 3,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

/// Direct dense evaluation: full 3D Gaussian weights at every valid window
/// position, per-scale 2x block averaging.
pub fn ms_ssim(x: &[f64], y: &[f64], dims: Dims, prm: &SsimParams) -> f64 {
    let w = prm.window;
    let r = (w / 2) as f64;
    let mut weights = vec![0.0; w * w * w];
    let mut total = 0.0;
    for c in 0..w {
        for b in 0..w {
            for a in 0..w {
                let d2 = (a as f64 - r).powi(2) + (b as f64 - r).powi(2) + (c as f64 - r).powi(2);
                let v = (-d2 / (2.0 * prm.sigma * prm.sigma)).exp();
                weights[a + w * (b + w * c)] = v;
                total += v;
            }
        }
    }
    for v in &mut weights {
        *v /= total;
    }
    let min_dim = dims.nx.min(dims.ny).min(dims.nz);
    let mut scales = prm.scales;
    while scales > 1 && min_dim < w * (1 << (scales - 1)) {
        scales -= 1;
    }
    let c1 = (prm.k1).powi(2);
    let c2 = (prm.k2).powi(2);

    let mut x = x.to_vec();
    let mut y = y.to_vec();
    let mut d = dims;
    let mut result = 1.0;
    for s in 0..scales {
        let mut ssim_acc = 0.0;
        let mut cs_acc = 0.0;
        let mut count = 0usize;
        for oz in 0..=d.nz - w {
            for oy in 0..=d.ny - w {
                for ox in 0..=d.nx - w {
                    let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                    for c in 0..w {
                        for b in 0..w {
                            for a in 0..w {
                                let k = weights[a + w * (b + w * c)];
                                let i = d.index(ox + a, oy + b, oz + c);
                                mx += k * x[i];
                                my += k * y[i];
                                sxx += k * x[i] * x[i];
                                syy += k * y[i] * y[i];
                                sxy += k * x[i] * y[i];
                            }
                        }
                    }
                    let vx = sxx - mx * mx;
                    let vy = syy - my * my;
                    let cov = sxy - mx * my;
                    let cs = (2.0 * cov + c2) / (vx + vy + c2);
                    let l = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
                    cs_acc += cs;
                    ssim_acc += l * cs;
                    count += 1;
                }
            }
        }
        let term = if s + 1 == scales { ssim_acc } else { cs_acc } / count as f64;
        result *= term.max(0.0).powf(1.0 / scales as f64);
        if s + 1 < scales {
            let nd = Dims::new(d.nx / 2, d.ny / 2, d.nz / 2);
            let shrink = |v: &[f64]| -> Vec<f64> {
                (0..nd.len())
                    .map(|i| {
                        let (a, b, c) = nd.coords(i);
                        let mut s = 0.0;
                        for k in 0..8 {
                            s += v[d.index(
                                2 * a + (k & 1),
                                2 * b + ((k >> 1) & 1),
                                2 * c + (k >> 2),
                            )];
                        }
                        s / 8.0
                    })
                    .collect()
            };
            x = shrink(&x);
            y = shrink(&y);
            d = nd;
        }
    }
    result
}

pub fn ms_ssim_loss(x: &[f64], y: &[f64], dims: Dims, prm: &SsimParams) -> f64 {
    (1.0 - ms_ssim(x, y, dims, prm)).max(0.0)
}

/// Hybrid total: CE + mean over classes of (msssim loss + jaccard loss).
pub fn hybrid_total(p: &ProbVolume, g: &LabelVolume, prm: &SsimParams) -> f64 {
    let c = p.channels();
    let mut acc = 0.0;
    for k in 0..c {
        let t = one_hot_channel(g, k);
        let pk = p.channel(k);
        acc += ms_ssim_loss(pk, &t, p.dims(), prm) + jaccard_loss(pk, &t);
    }
    ce(p, g) + acc / c as f64
}

/// Blob term for foreground classes with masking of sibling components.
pub fn blob_term(
    p: &ProbVolume,
    g: &LabelVolume,
    conn: Connectivity,
    prm: &SsimParams,
) -> Option<f64> {
    let dims = g.dims();
    let mut class_terms = Vec::new();
    for class in 1..p.channels() {
        let mask = Mask::from_fn(dims, |i| g.voxels()[i] as usize == class);
        let (ids, count) = bfs_components(&mask, conn);
        if count == 0 {
            continue;
        }
        let pc = p.channel(class);
        let mut s = 0.0;
        for id in 1..=count as u32 {
            let t: Vec<f64> = ids
                .iter()
                .map(|&v| if v == id { 1.0 } else { 0.0 })
                .collect();
            let q: Vec<f64> = (0..dims.len())
                .map(|i| {
                    if ids[i] == 0 || ids[i] == id {
                        pc[i]
                    } else {
                        0.0
                    }
                })
                .collect();
            s += bce(&q, &t) + ms_ssim_loss(&q, &t, dims, prm) + jaccard_loss(&q, &t);
        }
        class_terms.push(s / count as f64);
    }
    if class_terms.is_empty() {
        None
    } else {
        Some(class_terms.iter().sum::<f64>() / class_terms.len() as f64)
    }
}

/// Per-voxel mean recomputed voxel by voxel.
pub fn mean_members(members: &[ProbVolume]) -> Vec<f64> {
    let n = members[0].dims().len();
    let c = members[0].channels();
    let mut out = vec![0.0; n * c];
    for v in 0..n {
        for k in 0..c {
            let mut s = 0.0;
            for m in members {
                s += m.get(v, k);
            }
            out[k * n + v] = s / members.len() as f64;
        }
    }
    out
}
