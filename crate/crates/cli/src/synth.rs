use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use tumorseg_core::nifti::atomic_write;
use tumorseg_core::synth::{make_member, rasterize, SynthSpec};
use tumorseg_core::{write_nifti, CaseManifest, RunConfig};

use crate::{create_dir, pool, Batch};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Output directory; receives `gt/`, `members/` and `manifest.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    cases: usize,
    /// Edge length of the cubic volume.
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Ensemble members per case.
    #[arg(long, default_value_t = 3)]
    models: usize,
    /// Probability noise amplitude in [0, 0.5).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Base seed; case k uses `seed + k`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON case description used instead of the built-in lesion layout.
    #[arg(long, conflicts_with_all = ["cases", "size", "models", "noise", "seed"])]
    spec: Option<PathBuf>,
}

fn specs(args: &Args) -> Result<Vec<SynthSpec>> {
    if let Some(path) = &args.spec {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let spec: SynthSpec =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        return Ok(vec![spec]);
    }
    Ok((0..args.cases)
        .map(|k| {
            SynthSpec::brats_like(
                format!("case_{k:03}"),
                args.seed + k as u64,
                args.size,
                args.noise,
                args.models,
            )
        })
        .collect())
}

fn write_case(spec: &SynthSpec, out: &Path) -> Result<CaseManifest> {
    let gt = rasterize(spec)?;
    let gt_rel = PathBuf::from("gt").join(format!("{}.nii.gz", spec.case_id));
    write_nifti(&gt, out.join(&gt_rel))?;
    let members = (0..spec.n_models)
        .map(|m| {
            let rel = PathBuf::from("members").join(format!("{}_m{m}.nii.gz", spec.case_id));
            write_nifti(&make_member(spec, &gt, m)?, out.join(&rel))?;
            Ok(rel)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CaseManifest {
        case_id: spec.case_id.clone(),
        members,
        ground_truth: Some(gt_rel),
    })
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<Batch> {
    let specs = specs(&args)?;
    for s in &specs {
        s.validate()
            .with_context(|| format!("case {}", s.case_id))?;
    }
    create_dir(&args.out.join("gt"))?;
    create_dir(&args.out.join("members"))?;
    let manifest = pool(cfg.workers)?.install(|| {
        specs
            .par_iter()
            .map(|s| write_case(s, &args.out).with_context(|| format!("case {}", s.case_id)))
            .collect::<Result<Vec<_>>>()
    })?;
    let path = args.out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    atomic_write(&path, text.as_bytes())?;
    println!("wrote {} case(s) to {}", manifest.len(), args.out.display());
    Ok(Batch::ok())
}
