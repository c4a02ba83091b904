//! Forward evaluation of the segmentation losses: cross-entropy + Dice,
//! the BASNet-style hybrid (cross-entropy + MS-SSIM + Jaccard), and blob loss
//! layered on the hybrid.
//!
//! All per-class averages run over every class, background included.
//! Reductions are done in ascending class order and, for blob loss,
//! ascending component id.

mod msssim;

pub use msssim::{ms_ssim, ms_ssim_scales, MsSsimConfig, ScaleStats};

use serde::{Deserialize, Serialize};

use crate::components::{connected_components, Connectivity};
use crate::error::{Error, Result};
use crate::volume::{LabelVolume, ProbVolume};

/// Numerical guards shared by the loss terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConstants {
    /// Probabilities are clamped to at least this value before taking logs.
    pub ce_epsilon: f64,
    /// Added to numerator and denominator of the soft Dice and Jaccard ratios.
    pub smoothing: f64,
}

impl LossConstants {
    pub const DEFAULT: LossConstants = LossConstants {
        ce_epsilon: 1e-7,
        smoothing: 1e-6,
    };
}

impl Default for LossConstants {
    fn default() -> Self {
        LossConstants::DEFAULT
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobLossConfig {
    pub alpha: f64,
    pub beta: f64,
    pub connectivity: Connectivity,
    /// Treat background connected components as blobs too.
    #[serde(default)]
    pub include_background: bool,
    /// Zero the prediction on other ground-truth components of the same class
    /// when scoring one component.
    #[serde(default = "default_true")]
    pub mask_other_components: bool,
}

fn default_true() -> bool {
    true
}

impl Default for BlobLossConfig {
    fn default() -> Self {
        BlobLossConfig {
            alpha: 1.0,
            beta: 1.0,
            connectivity: Connectivity::Vertex26,
            include_background: false,
            mask_other_components: true,
        }
    }
}

impl BlobLossConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("blob.{name} must be >= 0, got {v}")));
            }
        }
        if self.alpha + self.beta <= 0.0 {
            return Err(Error::Config("blob.alpha + blob.beta must be > 0".into()));
        }
        Ok(())
    }
}

/// Every term that went into a loss total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub cross_entropy: f64,
    pub per_class_dice: Vec<f64>,
    pub per_class_jaccard: Option<Vec<f64>>,
    pub per_class_msssim: Option<Vec<f64>>,
    pub global_term: Option<f64>,
    pub blob_term: Option<f64>,
    /// Mean component loss per class; `None` for classes without components.
    pub per_class_blob: Option<Vec<Option<f64>>>,
    /// Ground-truth component count per class.
    pub blob_components: Option<Vec<usize>>,
    /// Set when the ground truth had no components to score.
    pub blob_empty: bool,
}

fn check_pair(p: &ProbVolume, g: &LabelVolume) -> Result<()> {
    p.meta().ensure_compatible(g.meta())?;
    if p.channels() != g.num_classes() as usize {
        return Err(Error::Shape(format!(
            "{} probability channels vs {} label classes",
            p.channels(),
            g.num_classes()
        )));
    }
    Ok(())
}

fn class_target(g: &LabelVolume, class: usize) -> Vec<f64> {
    g.voxels()
        .iter()
        .map(|&l| (l as usize == class) as u8 as f64)
        .collect()
}

/// Mean of `-ln(max(p[v, g[v]], eps))` over voxels.
pub fn cross_entropy(p: &ProbVolume, g: &LabelVolume) -> Result<f64> {
    cross_entropy_with(p, g, &LossConstants::DEFAULT)
}

pub fn cross_entropy_with(p: &ProbVolume, g: &LabelVolume, k: &LossConstants) -> Result<f64> {
    check_pair(p, g)?;
    let n = g.voxels().len();
    let sum: f64 = g.voxels().iter().enumerate().fold(0.0, |s, (v, &l)| {
        s - p.get(v, l as usize).max(k.ce_epsilon).ln()
    });
    Ok(sum / n as f64)
}

/// Sums `(Σ p·t, Σ p, Σ t)` for a soft prediction and a target.
fn overlap(p: &[f64], t: &[f64]) -> (f64, f64, f64) {
    let mut inter = 0.0;
    let mut ps = 0.0;
    let mut ts = 0.0;
    for (a, b) in p.iter().zip(t) {
        inter += a * b;
        ps += a;
        ts += b;
    }
    (inter, ps, ts)
}

fn soft_dice_loss(p: &[f64], t: &[f64], s: f64) -> f64 {
    let (i, ps, ts) = overlap(p, t);
    1.0 - (2.0 * i + s) / (ps + ts + s)
}

fn soft_jaccard_loss(p: &[f64], t: &[f64], s: f64) -> f64 {
    let (i, ps, ts) = overlap(p, t);
    1.0 - (i + s) / (ps + ts - i + s)
}

fn binary_cross_entropy(p: &[f64], t: &[f64], eps: f64) -> f64 {
    let sum: f64 = p
        .iter()
        .zip(t)
        .map(|(&a, &b)| -(b * a.max(eps).ln() + (1.0 - b) * (1.0 - a).max(eps).ln()))
        .sum();
    sum / p.len() as f64
}

fn ms_ssim_loss_raw(
    p: &[f64],
    t: &[f64],
    dims: crate::volume::Dims,
    cfg: &MsSsimConfig,
) -> Result<f64> {
    Ok((1.0 - ms_ssim(p, t, dims, cfg)?).max(0.0))
}

fn check_class(p: &ProbVolume, class: usize) -> Result<()> {
    if class >= p.channels() {
        return Err(Error::Shape(format!(
            "class {class} outside {} channels",
            p.channels()
        )));
    }
    Ok(())
}

/// Soft Dice loss for one class against its one-hot target.
pub fn dice_loss(p: &ProbVolume, g: &LabelVolume, class: usize) -> Result<f64> {
    dice_loss_with(p, g, class, &LossConstants::DEFAULT)
}

pub fn dice_loss_with(
    p: &ProbVolume,
    g: &LabelVolume,
    class: usize,
    k: &LossConstants,
) -> Result<f64> {
    check_pair(p, g)?;
    check_class(p, class)?;
    Ok(soft_dice_loss(
        p.channel(class),
        &class_target(g, class),
        k.smoothing,
    ))
}

/// Soft Jaccard loss for one class against its one-hot target.
pub fn jaccard_loss(p: &ProbVolume, g: &LabelVolume, class: usize) -> Result<f64> {
    jaccard_loss_with(p, g, class, &LossConstants::DEFAULT)
}

pub fn jaccard_loss_with(
    p: &ProbVolume,
    g: &LabelVolume,
    class: usize,
    k: &LossConstants,
) -> Result<f64> {
    check_pair(p, g)?;
    check_class(p, class)?;
    Ok(soft_jaccard_loss(
        p.channel(class),
        &class_target(g, class),
        k.smoothing,
    ))
}

/// `1 - MS-SSIM` between a probability channel and its one-hot target.
pub fn ms_ssim_loss(
    p: &ProbVolume,
    g: &LabelVolume,
    class: usize,
    cfg: &MsSsimConfig,
) -> Result<f64> {
    check_pair(p, g)?;
    check_class(p, class)?;
    ms_ssim_loss_raw(p.channel(class), &class_target(g, class), p.dims(), cfg)
}

/// Cross-entropy plus the class-averaged soft Dice loss.
pub fn ce_dice_loss(p: &ProbVolume, g: &LabelVolume) -> Result<LossBreakdown> {
    ce_dice_loss_with(p, g, &LossConstants::DEFAULT)
}

pub fn ce_dice_loss_with(
    p: &ProbVolume,
    g: &LabelVolume,
    k: &LossConstants,
) -> Result<LossBreakdown> {
    let ce = cross_entropy_with(p, g, k)?;
    let c = p.channels();
    let dice: Vec<f64> = (0..c)
        .map(|i| soft_dice_loss(p.channel(i), &class_target(g, i), k.smoothing))
        .collect();
    let total = ce + dice.iter().sum::<f64>() / c as f64;
    Ok(LossBreakdown {
        total,
        cross_entropy: ce,
        per_class_dice: dice,
        per_class_jaccard: None,
        per_class_msssim: None,
        global_term: None,
        blob_term: None,
        per_class_blob: None,
        blob_components: None,
        blob_empty: false,
    })
}

/// Cross-entropy plus the class average of `msssim_loss + jaccard_loss`.
pub fn basnet_hybrid_loss(
    p: &ProbVolume,
    g: &LabelVolume,
    cfg: &MsSsimConfig,
) -> Result<LossBreakdown> {
    basnet_hybrid_loss_with(p, g, cfg, &LossConstants::DEFAULT)
}

pub fn basnet_hybrid_loss_with(
    p: &ProbVolume,
    g: &LabelVolume,
    cfg: &MsSsimConfig,
    k: &LossConstants,
) -> Result<LossBreakdown> {
    let ce = cross_entropy_with(p, g, k)?;
    let c = p.channels();
    let mut dice = Vec::with_capacity(c);
    let mut jaccard = Vec::with_capacity(c);
    let mut msssim = Vec::with_capacity(c);
    for i in 0..c {
        let t = class_target(g, i);
        let pi = p.channel(i);
        dice.push(soft_dice_loss(pi, &t, k.smoothing));
        jaccard.push(soft_jaccard_loss(pi, &t, k.smoothing));
        msssim.push(ms_ssim_loss_raw(pi, &t, p.dims(), cfg)?);
    }
    let per_class: f64 = msssim.iter().zip(&jaccard).map(|(m, j)| m + j).sum();
    Ok(LossBreakdown {
        total: ce + per_class / c as f64,
        cross_entropy: ce,
        per_class_dice: dice,
        per_class_jaccard: Some(jaccard),
        per_class_msssim: Some(msssim),
        global_term: None,
        blob_term: None,
        per_class_blob: None,
        blob_components: None,
        blob_empty: false,
    })
}

/// Hybrid loss for a single binary channel: binary cross-entropy plus
/// `msssim_loss + jaccard_loss`. This is the per-component term of blob loss.
pub fn binary_hybrid_loss(
    p: &[f64],
    t: &[f64],
    dims: crate::volume::Dims,
    cfg: &MsSsimConfig,
    k: &LossConstants,
) -> Result<f64> {
    if p.len() != dims.len() || t.len() != dims.len() {
        return Err(Error::Shape(format!(
            "binary hybrid inputs of {} and {} voxels for {dims}",
            p.len(),
            t.len()
        )));
    }
    Ok(binary_cross_entropy(p, t, k.ce_epsilon)
        + ms_ssim_loss_raw(p, t, dims, cfg)?
        + soft_jaccard_loss(p, t, k.smoothing))
}

/// `alpha * hybrid(p, g) + beta * blob_term`.
///
/// For each class, every ground-truth connected component `n` is scored on
/// its own: the target is the component's indicator and, when
/// `mask_other_components` is set, the class probability is zeroed on the
/// other components of that class. Component losses are averaged within a
/// class, then across the classes that have at least one component.
pub fn blob_loss(
    p: &ProbVolume,
    g: &LabelVolume,
    cfg: &BlobLossConfig,
    ms: &MsSsimConfig,
) -> Result<LossBreakdown> {
    blob_loss_with(p, g, cfg, ms, &LossConstants::DEFAULT)
}

pub fn blob_loss_with(
    p: &ProbVolume,
    g: &LabelVolume,
    cfg: &BlobLossConfig,
    ms: &MsSsimConfig,
    k: &LossConstants,
) -> Result<LossBreakdown> {
    cfg.validate()?;
    let mut out = basnet_hybrid_loss_with(p, g, ms, k)?;
    let global = out.total;

    let c = p.channels();
    let first = if cfg.include_background { 0 } else { 1 };
    let mut per_class = vec![None; c];
    let mut counts = vec![0usize; c];
    for class in first..c {
        let cm = connected_components(&g.class_mask(class as u8), cfg.connectivity);
        counts[class] = cm.count();
        if cm.count() == 0 {
            continue;
        }
        let pc = p.channel(class);
        let ids = cm.ids();
        let mut sum = 0.0;
        for id in 1..=cm.count() as u32 {
            let target: Vec<f64> = ids.iter().map(|&v| (v == id) as u8 as f64).collect();
            let pred: Vec<f64> = if cfg.mask_other_components {
                pc.iter()
                    .zip(ids)
                    .map(|(&pv, &v)| if v == 0 || v == id { pv } else { 0.0 })
                    .collect()
            } else {
                pc.to_vec()
            };
            sum += binary_hybrid_loss(&pred, &target, p.dims(), ms, k)?;
        }
        per_class[class] = Some(sum / cm.count() as f64);
    }

    let scored: Vec<f64> = per_class.iter().flatten().copied().collect();
    let (blob, empty) = if scored.is_empty() {
        (0.0, true)
    } else {
        (scored.iter().sum::<f64>() / scored.len() as f64, false)
    };

    out.total = cfg.alpha * global + cfg.beta * blob;
    out.global_term = Some(global);
    out.blob_term = Some(blob);
    out.per_class_blob = Some(per_class);
    out.blob_components = Some(counts);
    out.blob_empty = empty;
    Ok(out)
}
