use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use tumorseg_core::nifti::{atomic_write, case_stem};
use tumorseg_core::{evaluate_case, read_nifti, MetricReport, RunConfig};

use crate::postproc::list_volumes;
use crate::{pool, Batch};

pub const HEADER: [&str; 9] = [
    "case_id",
    "region",
    "lesion_wise_dice",
    "dice",
    "lesion_wise_hd95",
    "hd95",
    "tp",
    "fp",
    "fn",
];

/// `case_id` of the per-region summary rows.
pub const SUMMARY_ID: &str = "mean";

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Directory of predicted label volumes.
    #[arg(long)]
    pred: PathBuf,
    /// Directory of ground-truth label volumes; files pair up by case stem.
    #[arg(long)]
    gt: PathBuf,
    /// CSV report path.
    #[arg(long)]
    out: PathBuf,
}

fn by_stem(dir: &std::path::Path) -> Result<BTreeMap<String, PathBuf>> {
    Ok(list_volumes(dir)?
        .into_iter()
        .map(|p| (case_stem(&p), p))
        .collect())
}

fn score(
    case: &str,
    pred: &std::path::Path,
    gt: &std::path::Path,
    cfg: &RunConfig,
) -> Result<Vec<MetricReport>> {
    let p = read_nifti(pred)?.into_labels()?;
    let g = read_nifti(gt)?.into_labels()?.with_case_id(case);
    Ok(evaluate_case(&p, &g, &cfg.regions, &cfg.lesionwise)?)
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn record(r: &MetricReport) -> [String; 9] {
    [
        r.case_id.clone(),
        r.region.clone(),
        fmt(r.lesion_wise_dice),
        fmt(r.dice),
        fmt(r.lesion_wise_hd95),
        fmt(r.hd95),
        r.tp.to_string(),
        r.fp.to_string(),
        r.fn_.to_string(),
    ]
}

/// Mean of each metric over cases; lesion counts are totals.
fn summary(region: &str, rows: &[&MetricReport]) -> MetricReport {
    let n = rows.len().max(1) as f64;
    let mean = |f: fn(&MetricReport) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
    MetricReport {
        case_id: SUMMARY_ID.to_string(),
        region: region.to_string(),
        lesion_wise_dice: mean(|r| r.lesion_wise_dice),
        dice: mean(|r| r.dice),
        lesion_wise_hd95: mean(|r| r.lesion_wise_hd95),
        hd95: mean(|r| r.hd95),
        tp: rows.iter().map(|r| r.tp).sum(),
        fp: rows.iter().map(|r| r.fp).sum(),
        fn_: rows.iter().map(|r| r.fn_).sum(),
    }
}

/// Renders the report: case rows (case ascending, regions in config order)
/// followed by one summary row per region.
pub fn render_csv(per_case: &[Vec<MetricReport>], regions: &[String]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER)?;
    for rows in per_case {
        for r in rows {
            w.write_record(record(r))?;
        }
    }
    for region in regions {
        let rows: Vec<&MetricReport> = per_case
            .iter()
            .flatten()
            .filter(|r| &r.region == region)
            .collect();
        w.write_record(record(&summary(region, &rows)))?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<Batch> {
    let preds = by_stem(&args.pred)?;
    let gts = by_stem(&args.gt)?;
    for case in preds.keys().filter(|k| !gts.contains_key(*k)) {
        eprintln!("warning: {case}: prediction has no ground truth, skipped");
    }
    for case in gts.keys().filter(|k| !preds.contains_key(*k)) {
        eprintln!("warning: {case}: ground truth has no prediction, skipped");
    }
    let matched: Vec<(&String, &PathBuf, &PathBuf)> = preds
        .iter()
        .filter_map(|(case, p)| gts.get(case).map(|g| (case, p, g)))
        .collect();
    if matched.is_empty() {
        bail!(
            "no case in {} matches a ground truth in {}",
            args.pred.display(),
            args.gt.display()
        );
    }

    let results: Vec<Result<Vec<MetricReport>>> = pool(cfg.workers)?.install(|| {
        matched
            .par_iter()
            .map(|(case, p, g)| score(case, p, g, cfg))
            .collect()
    });
    let mut failed = 0;
    let mut per_case = Vec::new();
    for ((case, _, _), r) in matched.iter().zip(results) {
        match r {
            Ok(rows) => per_case.push(rows),
            Err(e) => {
                eprintln!("error: case {case}: {e:#}");
                failed += 1;
            }
        }
    }
    let regions: Vec<String> = cfg.regions.iter().map(|r| r.name.clone()).collect();
    let bytes = render_csv(&per_case, &regions)?;
    atomic_write(&args.out, &bytes).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "evaluated {} case(s) into {}",
        per_case.len(),
        args.out.display()
    );
    Ok(Batch { failed })
}
