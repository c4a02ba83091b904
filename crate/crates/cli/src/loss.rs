use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;
use tumorseg_core::losses::{basnet_hybrid_loss_with, blob_loss_with, ce_dice_loss_with};
use tumorseg_core::{read_nifti, LossBreakdown, RunConfig};

use crate::Batch;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Predicted probability volume.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth label volume.
    #[arg(long)]
    gt: PathBuf,
}

#[derive(Serialize)]
struct Report {
    case_id: String,
    ce_dice: LossBreakdown,
    hybrid: LossBreakdown,
    blob: LossBreakdown,
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<Batch> {
    let pred = read_nifti(&args.pred)
        .and_then(|v| v.into_probs())
        .with_context(|| format!("prediction {}", args.pred.display()))?;
    let gt = read_nifti(&args.gt)
        .and_then(|v| v.into_labels())
        .with_context(|| format!("ground truth {}", args.gt.display()))?;
    let k = &cfg.loss_constants;
    let report = Report {
        case_id: gt.meta().case_id.clone(),
        ce_dice: ce_dice_loss_with(&pred, &gt, k)?,
        hybrid: basnet_hybrid_loss_with(&pred, &gt, &cfg.msssim, k)?,
        blob: blob_loss_with(&pred, &gt, &cfg.blob, &cfg.msssim, k)?,
    };
    println!("{}", serde_json::to_string(&report)?);
    Ok(Batch::ok())
}
