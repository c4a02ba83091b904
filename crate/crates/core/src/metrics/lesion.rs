use std::collections::BTreeSet;

use crate::components::{connected_components, dilate};
use crate::error::Result;
use crate::volume::{Dims, Mask};

use super::distance::hd95;
use super::{dice_score, LesionwiseConfig};

/// Score of one matched ground-truth lesion.
#[derive(Clone, Debug, PartialEq)]
pub struct LesionScore {
    /// Ground-truth component id (before size filtering).
    pub gt_id: u32,
    /// Matched prediction component ids.
    pub pred_ids: Vec<u32>,
    pub dice: f64,
    pub hd95: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LesionwiseResult {
    pub lesion_wise_dice: f64,
    pub lesion_wise_hd95: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub lesions: Vec<LesionScore>,
}

/// Inclusive-exclusive voxel box.
#[derive(Clone, Copy, Debug)]
struct Bounds {
    lo: [usize; 3],
    hi: [usize; 3],
}

impl Bounds {
    fn of(dims: Dims, voxels: &[usize]) -> Bounds {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0; 3];
        for &i in voxels {
            let (x, y, z) = dims.coords(i);
            for (k, c) in [x, y, z].into_iter().enumerate() {
                lo[k] = lo[k].min(c);
                hi[k] = hi[k].max(c + 1);
            }
        }
        Bounds { lo, hi }
    }

    fn union(self, other: Bounds) -> Bounds {
        Bounds {
            lo: [0, 1, 2].map(|k| self.lo[k].min(other.lo[k])),
            hi: [0, 1, 2].map(|k| self.hi[k].max(other.hi[k])),
        }
    }

    fn padded(self, pad: usize, dims: Dims) -> Bounds {
        let n = dims.as_array();
        Bounds {
            lo: [0, 1, 2].map(|k| self.lo[k].saturating_sub(pad)),
            hi: [0, 1, 2].map(|k| (self.hi[k] + pad).min(n[k])),
        }
    }

    fn dims(&self) -> Dims {
        Dims::new(
            self.hi[0] - self.lo[0],
            self.hi[1] - self.lo[1],
            self.hi[2] - self.lo[2],
        )
    }

    fn local_index(&self, dims: Dims, i: usize) -> usize {
        let (x, y, z) = dims.coords(i);
        self.dims()
            .index(x - self.lo[0], y - self.lo[1], z - self.lo[2])
    }

    fn global_index(&self, dims: Dims, local: usize) -> usize {
        let (x, y, z) = self.dims().coords(local);
        dims.index(x + self.lo[0], y + self.lo[1], z + self.lo[2])
    }

    fn mask(&self, dims: Dims, voxels: impl IntoIterator<Item = usize>) -> Mask {
        let mut m = Mask::empty(self.dims());
        for i in voxels {
            m.set(self.local_index(dims, i), true);
        }
        m
    }
}

/// Lesion-wise Dice and HD95 between two binary masks.
///
/// Lesions are connected components under `cfg.match_connectivity`; those
/// below `cfg.min_lesion_voxels` are dropped on both sides. A prediction
/// component matches a ground-truth lesion when it touches the lesion dilated
/// by `cfg.match_dilation_iters`. Each matched lesion is scored against the
/// union of its matching prediction components; every unmatched prediction
/// (FP) and unmatched lesion (FN) contributes the configured penalties to the
/// per-case mean.
pub fn lesion_wise(
    pred: &Mask,
    gt: &Mask,
    spacing: [f64; 3],
    cfg: &LesionwiseConfig,
) -> Result<LesionwiseResult> {
    cfg.validate()?;
    assert_eq!(
        pred.dims(),
        gt.dims(),
        "lesion-wise masks must share dimensions"
    );
    let dims = gt.dims();
    let conn = cfg.match_connectivity;

    let gt_cm = connected_components(gt, conn);
    let pred_cm = connected_components(pred, conn);
    let gt_members = gt_cm.members();
    let pred_members = pred_cm.members();
    let keep_gt: Vec<u32> = (1..=gt_cm.count() as u32)
        .filter(|id| gt_members[*id as usize - 1].len() >= cfg.min_lesion_voxels)
        .collect();
    let keep_pred: Vec<bool> = pred_members
        .iter()
        .map(|m| m.len() >= cfg.min_lesion_voxels)
        .collect();
    let pred_ids = pred_cm.ids();

    let mut matched_pred = BTreeSet::new();
    let mut lesions = Vec::new();
    let mut fn_ = 0;
    for &gid in &keep_gt {
        let voxels = &gt_members[gid as usize - 1];
        let bounds = Bounds::of(dims, voxels).padded(cfg.match_dilation_iters, dims);
        let dilated = dilate(
            &bounds.mask(dims, voxels.iter().copied()),
            cfg.match_dilation_iters,
            conn,
        );
        let hits: BTreeSet<u32> = dilated
            .iter_set()
            .map(|local| pred_ids[bounds.global_index(dims, local)])
            .filter(|&pid| pid > 0 && keep_pred[pid as usize - 1])
            .collect();
        if hits.is_empty() {
            fn_ += 1;
            continue;
        }
        matched_pred.extend(hits.iter().copied());

        // Score on a crop holding the lesion and its matches plus a one-voxel
        // margin, so surfaces are unchanged.
        let mut scope = Bounds::of(dims, voxels);
        for &pid in &hits {
            scope = scope.union(Bounds::of(dims, &pred_members[pid as usize - 1]));
        }
        let scope = scope.padded(1, dims);
        let g = scope.mask(dims, voxels.iter().copied());
        let p = scope.mask(
            dims,
            hits.iter()
                .flat_map(|pid| pred_members[*pid as usize - 1].iter().copied()),
        );
        lesions.push(LesionScore {
            gt_id: gid,
            pred_ids: hits.into_iter().collect(),
            dice: dice_score(&p, &g),
            hd95: hd95(&p, &g, spacing),
        });
    }

    let fp = keep_pred
        .iter()
        .enumerate()
        .filter(|(k, keep)| **keep && !matched_pred.contains(&(*k as u32 + 1)))
        .count();
    let tp = lesions.len();
    let n = tp + fp + fn_;
    let (lw_dice, lw_hd95) = if n == 0 {
        (1.0, 0.0)
    } else {
        let dice_sum: f64 = lesions.iter().map(|l| l.dice).sum::<f64>()
            + fp as f64 * cfg.fp_dice_penalty
            + fn_ as f64 * cfg.fn_dice_penalty;
        let hd_sum: f64 =
            lesions.iter().map(|l| l.hd95).sum::<f64>() + (fp + fn_) as f64 * cfg.hd95_penalty;
        (dice_sum / n as f64, hd_sum / n as f64)
    };

    Ok(LesionwiseResult {
        lesion_wise_dice: lw_dice,
        lesion_wise_hd95: lw_hd95,
        tp,
        fp,
        fn_,
        lesions,
    })
}
