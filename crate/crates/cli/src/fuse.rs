use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use tumorseg_core::config::load_manifest;
use tumorseg_core::{read_nifti, write_nifti, CaseManifest, FusionAccumulator, RunConfig};

use crate::{create_dir, pool, Batch};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// JSON list of cases with member probability volumes.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory: labels at `<case>.nii.gz`, probabilities under `prob/`.
    #[arg(long)]
    out: PathBuf,
}

/// Members are read and accumulated one at a time, so memory stays at two
/// probability volumes regardless of ensemble size.
fn fuse_case(case: &CaseManifest, out: &Path) -> Result<()> {
    let mut acc = FusionAccumulator::new();
    for path in &case.members {
        let member = read_nifti(path)
            .and_then(|v| v.into_probs())
            .with_context(|| format!("member {}", path.display()))?;
        acc.add(&member)
            .with_context(|| format!("member {}", path.display()))?;
    }
    let fused = acc.finish()?.with_case_id(&case.case_id);
    let labels = fused.argmax_labels();
    write_nifti(
        &fused,
        out.join("prob").join(format!("{}.nii.gz", case.case_id)),
    )?;
    write_nifti(&labels, out.join(format!("{}.nii.gz", case.case_id)))?;
    Ok(())
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<Batch> {
    let cases = load_manifest(&args.manifest)?;
    create_dir(&args.out.join("prob"))?;
    let results: Vec<Result<()>> =
        pool(cfg.workers)?.install(|| cases.par_iter().map(|c| fuse_case(c, &args.out)).collect());
    let mut failed = 0;
    for (case, r) in cases.iter().zip(results) {
        if let Err(e) = r {
            eprintln!("error: case {}: {e:#}", case.case_id);
            failed += 1;
        }
    }
    println!("fused {} of {} case(s)", cases.len() - failed, cases.len());
    Ok(Batch { failed })
}
