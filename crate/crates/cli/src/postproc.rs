use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use tumorseg_core::nifti::{case_stem, is_nifti_path};
use tumorseg_core::postprocess::postprocess;
use tumorseg_core::{read_nifti, write_nifti, PostprocessConfig, RunConfig};

use crate::{create_dir, pool, Batch};

#[derive(clap::Args, Debug)]
pub struct Args {
    /// A label volume, or a directory of them.
    #[arg(long)]
    input: PathBuf,
    /// Output file for a single input, output directory otherwise.
    #[arg(long)]
    out: PathBuf,
}

fn process_file(input: &Path, output: &Path, cfg: &PostprocessConfig) -> Result<()> {
    let labels = read_nifti(input)?.into_labels()?;
    cfg.validate(labels.num_classes())?;
    let cleaned = postprocess(&labels, cfg)?;
    write_nifti(&cleaned, output)?;
    Ok(())
}

/// Sorted `.nii` / `.nii.gz` files directly inside `dir`.
pub(crate) fn list_volumes(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() && is_nifti_path(&path) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<Batch> {
    if !args.input.is_dir() {
        process_file(&args.input, &args.out, &cfg.postprocess)
            .with_context(|| format!("post-processing {}", args.input.display()))?;
        return Ok(Batch::ok());
    }
    let files = list_volumes(&args.input)?;
    create_dir(&args.out)?;
    let results: Vec<Result<()>> = pool(cfg.workers)?.install(|| {
        files
            .par_iter()
            .map(|f| {
                let name = format!("{}.nii.gz", case_stem(f));
                process_file(f, &args.out.join(name), &cfg.postprocess)
            })
            .collect()
    });
    let mut failed = 0;
    for (file, r) in files.iter().zip(results) {
        if let Err(e) = r {
            eprintln!("error: {}: {e:#}", file.display());
            failed += 1;
        }
    }
    println!(
        "post-processed {} of {} volume(s)",
        files.len() - failed,
        files.len()
    );
    Ok(Batch { failed })
}
