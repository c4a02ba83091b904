use std::path::PathBuf;

use anyhow::{Context, Result};
use tumorseg_core::nifti::atomic_write;
use tumorseg_core::read_nifti;
use tumorseg_core::render::{render_slices, Axis};

use crate::Batch;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Label volumes, rendered left to right (1 to 3).
    #[arg(long = "input", required = true, num_args = 1..=3)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Slice index along `axis`.
    #[arg(long)]
    slice: usize,
    /// Output PPM (binary P6).
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum AxisArg {
    X,
    Y,
    Z,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Axis {
        match a {
            AxisArg::X => Axis::X,
            AxisArg::Y => Axis::Y,
            AxisArg::Z => Axis::Z,
        }
    }
}

pub fn run(args: Args) -> Result<Batch> {
    anyhow::ensure!(
        args.inputs.len() <= 3,
        "at most 3 volumes can be rendered together"
    );
    let volumes = args
        .inputs
        .iter()
        .map(|p| {
            read_nifti(p)
                .and_then(|v| v.into_labels())
                .with_context(|| format!("reading {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<_> = volumes.iter().collect();
    let image = render_slices(&refs, args.axis.into(), args.slice)?;
    atomic_write(&args.out, &image.to_ppm())?;
    println!(
        "wrote {}x{} image to {}",
        image.width,
        image.height,
        args.out.display()
    );
    Ok(Batch::ok())
}
