//! Label-volume clean-up: small-component removal and per-class
//! closing + reconstruction smoothing.

use serde::{Deserialize, Serialize};

use crate::components::{close, connected_components, erode, morph_reconstruct, Connectivity};
use crate::error::{Error, Result};
use crate::volume::{LabelVolume, Mask};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostprocessConfig {
    /// Components with fewer voxels than this are relabelled background.
    pub min_component_voxels: usize,
    pub connectivity: Connectivity,
    pub smooth_iterations: usize,
    /// Foreground classes, highest priority first.
    pub class_priority: Vec<u8>,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        PostprocessConfig {
            min_component_voxels: 50,
            connectivity: Connectivity::Vertex26,
            smooth_iterations: 1,
            class_priority: vec![3, 1, 2],
        }
    }
}

impl PostprocessConfig {
    pub fn validate(&self, num_classes: u8) -> Result<()> {
        let mut sorted = self.class_priority.clone();
        sorted.sort_unstable();
        let expected: Vec<u8> = (1..num_classes).collect();
        if sorted != expected {
            return Err(Error::Config(format!(
                "postprocess.class_priority must be a permutation of {expected:?}, got {:?}",
                self.class_priority
            )));
        }
        Ok(())
    }
}

/// Relabels foreground components smaller than `min_component_voxels` to
/// background, class by class.
pub fn size_filter(l: &LabelVolume, cfg: &PostprocessConfig) -> Result<LabelVolume> {
    if cfg.min_component_voxels == 0 {
        return Ok(l.clone());
    }
    let mut voxels = l.voxels().to_vec();
    for class in 1..l.num_classes() {
        let cm = connected_components(&l.class_mask(class), cfg.connectivity);
        let counts = cm.voxel_counts();
        for (v, &id) in cm.ids().iter().enumerate() {
            if id > 0 && counts[id as usize - 1] < cfg.min_component_voxels {
                voxels[v] = 0;
            }
        }
    }
    LabelVolume::new(l.meta().clone(), l.num_classes(), voxels)
}

/// Closes each class mask, then keeps only the closed components that
/// contain part of the class mask eroded once. Where classes overlap the
/// earliest entry of `class_priority` wins; unclaimed voxels are background.
pub fn morph_smooth(l: &LabelVolume, cfg: &PostprocessConfig) -> Result<LabelVolume> {
    cfg.validate(l.num_classes())?;
    if cfg.smooth_iterations == 0 {
        return Ok(l.clone());
    }
    let mut out = vec![0u8; l.voxels().len()];
    let mut claimed = Mask::empty(l.dims());
    for &class in &cfg.class_priority {
        let original = l.class_mask(class);
        if original.is_empty() {
            continue;
        }
        let closed = close(&original, cfg.smooth_iterations, cfg.connectivity);
        // Closing can lose voxels on the volume border, so clip the marker.
        let marker = erode(&original, 1, cfg.connectivity).and(&closed);
        let smoothed = morph_reconstruct(&marker, &closed, cfg.connectivity)?;
        for v in smoothed.iter_set() {
            if !claimed.get(v) {
                claimed.set(v, true);
                out[v] = class;
            }
        }
    }
    LabelVolume::new(l.meta().clone(), l.num_classes(), out)
}

/// `size_filter` followed by `morph_smooth`.
pub fn postprocess(l: &LabelVolume, cfg: &PostprocessConfig) -> Result<LabelVolume> {
    morph_smooth(&size_filter(l, cfg)?, cfg)
}
