//! Non-training core of an ensemble brain-tumor segmentation pipeline.
//!
//! - [`ensemble`]: per-voxel softmax averaging of member probability volumes.
//! - [`losses`]: forward evaluation of cross-entropy + Dice, the
//!   cross-entropy + MS-SSIM + Jaccard hybrid, and blob loss.
//! - [`postprocess`]: small-component removal and morphological smoothing.
//! - [`metrics`]: Dice, HD95 and their lesion-wise variants per tumor region.
//! - [`components`]: 3D connected components and binary morphology.
//! - [`nifti`]: NIfTI-1 I/O for label and probability volumes.
//! - [`synth`]: deterministic synthetic cases.

pub mod components;
pub mod config;
pub mod ensemble;
mod error;
pub mod losses;
pub mod metrics;
pub mod nifti;
pub mod postprocess;
pub mod render;
pub mod synth;
pub mod volume;

pub use components::{connected_components, ComponentMap, Connectivity};
pub use config::{CaseManifest, RunConfig};
pub use ensemble::{fuse, fuse_to_labels, EnsembleInput, FusionAccumulator};
pub use error::{Error, Result};
pub use losses::{BlobLossConfig, LossBreakdown, MsSsimConfig};
pub use metrics::{evaluate_case, LesionwiseConfig, MetricReport};
pub use nifti::{read_nifti, write_nifti, Volume};
pub use postprocess::PostprocessConfig;
pub use volume::{region_mask, Dims, LabelVolume, Mask, ProbVolume, RegionSpec, VolumeMeta};
