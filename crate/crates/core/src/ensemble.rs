//! Unweighted softmax averaging across ensemble members.

use crate::error::{Error, Result};
use crate::volume::{LabelVolume, ProbVolume, VolumeMeta};

/// Streaming accumulator: members are added one at a time so only the
/// running sum and the current member need to be resident.
#[derive(Clone, Debug)]
pub struct FusionAccumulator {
    meta: Option<VolumeMeta>,
    channels: usize,
    sum: Vec<f64>,
    members: usize,
}

impl Default for FusionAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl FusionAccumulator {
    pub fn new() -> Self {
        FusionAccumulator {
            meta: None,
            channels: 0,
            sum: Vec::new(),
            members: 0,
        }
    }

    pub fn members(&self) -> usize {
        self.members
    }

    pub fn add(&mut self, member: &ProbVolume) -> Result<()> {
        match &self.meta {
            None => {
                self.meta = Some(member.meta().clone());
                self.channels = member.channels();
                self.sum = member.probs().to_vec();
            }
            Some(meta) => {
                meta.ensure_compatible(member.meta())?;
                if member.channels() != self.channels {
                    return Err(Error::Shape(format!(
                        "member {} has {} channels, expected {}",
                        self.members,
                        member.channels(),
                        self.channels
                    )));
                }
                for (s, v) in self.sum.iter_mut().zip(member.probs()) {
                    *s += v;
                }
            }
        }
        self.members += 1;
        Ok(())
    }

    /// Mean probability per voxel and class.
    pub fn finish(self) -> Result<ProbVolume> {
        let meta = self.meta.ok_or(Error::EmptyEnsemble)?;
        let m = self.members as f64;
        let probs = self.sum.into_iter().map(|s| s / m).collect();
        Ok(ProbVolume::from_parts_unchecked(meta, self.channels, probs))
    }
}

/// An ordered, non-empty set of compatible member volumes.
#[derive(Clone, Debug)]
pub struct EnsembleInput {
    members: Vec<ProbVolume>,
}

impl EnsembleInput {
    pub fn new(members: Vec<ProbVolume>) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyEnsemble)?;
        for (k, m) in members.iter().enumerate().skip(1) {
            first.meta().ensure_compatible(m.meta())?;
            if m.channels() != first.channels() {
                return Err(Error::Shape(format!(
                    "member {k} has {} channels, expected {}",
                    m.channels(),
                    first.channels()
                )));
            }
        }
        Ok(EnsembleInput { members })
    }

    pub fn members(&self) -> &[ProbVolume] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Per-voxel, per-class arithmetic mean of the members, summed in member order.
pub fn fuse(e: &EnsembleInput) -> Result<ProbVolume> {
    let mut acc = FusionAccumulator::new();
    for m in e.members() {
        acc.add(m)?;
    }
    acc.finish()
}

/// `argmax_labels(fuse(e))`.
pub fn fuse_to_labels(e: &EnsembleInput) -> Result<LabelVolume> {
    Ok(fuse(e)?.argmax_labels())
}
