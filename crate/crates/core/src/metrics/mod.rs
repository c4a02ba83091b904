//! Whole-region and lesion-wise Dice / HD95.

pub mod distance;
mod lesion;

pub use distance::{hd95, hd95_with, percentile, surface_voxels, DistanceMethod};
pub use lesion::{lesion_wise, LesionScore, LesionwiseResult};

use serde::{Deserialize, Serialize};

use crate::components::Connectivity;
use crate::error::{Error, Result};
use crate::volume::{region_mask, LabelVolume, Mask, RegionSpec};

/// HD95 assigned to every unmatched lesion, in mm.
pub const HD95_PENALTY_MM: f64 = 374.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LesionwiseConfig {
    /// Dilation applied to each ground-truth lesion before matching.
    pub match_dilation_iters: usize,
    pub match_connectivity: Connectivity,
    pub fp_dice_penalty: f64,
    pub fn_dice_penalty: f64,
    pub hd95_penalty: f64,
    /// Components smaller than this are ignored on both sides.
    pub min_lesion_voxels: usize,
}

impl Default for LesionwiseConfig {
    fn default() -> Self {
        LesionwiseConfig {
            match_dilation_iters: 3,
            match_connectivity: Connectivity::Vertex26,
            fp_dice_penalty: 0.0,
            fn_dice_penalty: 0.0,
            hd95_penalty: HD95_PENALTY_MM,
            min_lesion_voxels: 50,
        }
    }
}

impl LesionwiseConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("fp_dice_penalty", self.fp_dice_penalty),
            ("fn_dice_penalty", self.fn_dice_penalty),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!(
                    "lesionwise.{name} must be finite, got {v}"
                )));
            }
        }
        if !(self.hd95_penalty.is_finite() && self.hd95_penalty > 0.0) {
            return Err(Error::Config(format!(
                "lesionwise.hd95_penalty must be finite and > 0, got {}",
                self.hd95_penalty
            )));
        }
        Ok(())
    }
}

/// One row of the per-case evaluation table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub case_id: String,
    pub region: String,
    pub lesion_wise_dice: f64,
    pub dice: f64,
    pub lesion_wise_hd95: f64,
    pub hd95: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// `2|P∩G| / (|P|+|G|)`, with two empty masks scoring 1.
pub fn dice_score(pred: &Mask, gt: &Mask) -> f64 {
    let p = pred.count();
    let g = gt.count();
    if p + g == 0 {
        return 1.0;
    }
    2.0 * pred.intersection_count(gt) as f64 / (p + g) as f64
}

/// Per-region Dice, HD95 and their lesion-wise counterparts.
///
/// Whole-region HD95 between an empty and a non-empty mask is reported as
/// `cfg.hd95_penalty`.
pub fn evaluate_case(
    pred: &LabelVolume,
    gt: &LabelVolume,
    regions: &[RegionSpec],
    cfg: &LesionwiseConfig,
) -> Result<Vec<MetricReport>> {
    cfg.validate()?;
    pred.meta().ensure_compatible(gt.meta())?;
    let spacing = gt.meta().spacing;
    let classes = pred.num_classes().max(gt.num_classes());
    regions
        .iter()
        .map(|region| {
            region.validate(classes)?;
            let p = region_mask_unchecked(pred, region);
            let g = region_mask_unchecked(gt, region);
            let whole_hd = hd95(&p, &g, spacing);
            let lw = lesion_wise(&p, &g, spacing, cfg)?;
            Ok(MetricReport {
                case_id: gt.meta().case_id.clone(),
                region: region.name.clone(),
                lesion_wise_dice: lw.lesion_wise_dice,
                dice: dice_score(&p, &g),
                lesion_wise_hd95: lw.lesion_wise_hd95,
                hd95: if whole_hd.is_finite() {
                    whole_hd
                } else {
                    cfg.hd95_penalty
                },
                tp: lw.tp,
                fp: lw.fp,
                fn_: lw.fn_,
            })
        })
        .collect()
}

// Pred and gt may declare different class counts; the region was validated
// against the larger one.
fn region_mask_unchecked(l: &LabelVolume, region: &RegionSpec) -> Mask {
    match region_mask(l, region) {
        Ok(m) => m,
        Err(_) => Mask::from_fn(l.dims(), |i| region.labels.contains(&l.voxels()[i])),
    }
}
