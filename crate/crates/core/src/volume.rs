//! Dense 3D volume types.
//!
//! All voxel arrays are stored x-fastest, matching the NIfTI on-disk order.
//! Probability volumes are channel-major: the full x/y/z block of channel 0,
//! then channel 1, and so on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of classes in the BraTS labelling (background + 3 tumor classes).
pub const BRATS_CLASSES: u8 = 4;

/// Voxel counts along x, y and z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims { nx, ny, nz }
    }

    pub fn cube(n: usize) -> Self {
        Dims::new(n, n, n)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize, usize) {
        let x = index % self.nx;
        let rest = index / self.nx;
        (x, rest % self.ny, rest / self.ny)
    }

    /// Index of the voxel displaced by `(dx, dy, dz)`, or `None` outside the volume.
    #[inline]
    pub fn offset(&self, (x, y, z): (usize, usize, usize), d: (i32, i32, i32)) -> Option<usize> {
        let nx = x as i64 + d.0 as i64;
        let ny = y as i64 + d.1 as i64;
        let nz = z as i64 + d.2 as i64;
        if nx < 0
            || ny < 0
            || nz < 0
            || nx >= self.nx as i64
            || ny >= self.ny as i64
            || nz >= self.nz as i64
        {
            return None;
        }
        Some(self.index(nx as usize, ny as usize, nz as usize))
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// Geometry and identity shared by every volume of a case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeMeta {
    pub dims: Dims,
    /// Millimetres per voxel along x, y, z.
    pub spacing: [f64; 3],
    pub case_id: String,
}

impl VolumeMeta {
    pub fn new(dims: Dims, spacing: [f64; 3], case_id: impl Into<String>) -> Result<Self> {
        if dims.nx == 0 || dims.ny == 0 || dims.nz == 0 {
            return Err(Error::Shape(format!(
                "dimensions must be positive, got {dims}"
            )));
        }
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Shape(format!(
                "spacing must be positive and finite, got {spacing:?}"
            )));
        }
        Ok(VolumeMeta {
            dims,
            spacing,
            case_id: case_id.into(),
        })
    }

    /// Unit-spacing metadata, convenient for tests and synthetic data.
    pub fn unit(dims: Dims, case_id: impl Into<String>) -> Result<Self> {
        VolumeMeta::new(dims, [1.0; 3], case_id)
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Volumes are combinable when dims and spacing agree; the case id is ignored.
    pub fn is_compatible(&self, other: &VolumeMeta) -> bool {
        self.dims == other.dims && self.spacing == other.spacing
    }

    pub fn ensure_compatible(&self, other: &VolumeMeta) -> Result<()> {
        if self.is_compatible(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{} @ {:?} vs {} @ {:?}",
                self.dims, self.spacing, other.dims, other.spacing
            )))
        }
    }
}

/// Discrete per-voxel class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelVolume {
    meta: VolumeMeta,
    num_classes: u8,
    voxels: Vec<u8>,
}

impl LabelVolume {
    pub fn new(meta: VolumeMeta, num_classes: u8, voxels: Vec<u8>) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::Data("label volume needs at least one class".into()));
        }
        if voxels.len() != meta.dims.len() {
            return Err(Error::Shape(format!(
                "expected {} voxels for {}, got {}",
                meta.dims.len(),
                meta.dims,
                voxels.len()
            )));
        }
        if let Some((i, v)) = voxels.iter().enumerate().find(|(_, v)| **v >= num_classes) {
            return Err(Error::Data(format!(
                "label {v} at voxel {i} is outside 0..{num_classes}"
            )));
        }
        Ok(LabelVolume {
            meta,
            num_classes,
            voxels,
        })
    }

    pub fn background(meta: VolumeMeta, num_classes: u8) -> Self {
        let n = meta.dims.len();
        LabelVolume {
            meta,
            num_classes,
            voxels: vec![0; n],
        }
    }

    pub fn meta(&self) -> &VolumeMeta {
        &self.meta
    }

    pub fn dims(&self) -> Dims {
        self.meta.dims
    }

    pub fn num_classes(&self) -> u8 {
        self.num_classes
    }

    pub fn voxels(&self) -> &[u8] {
        &self.voxels
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u8 {
        self.voxels[self.meta.dims.index(x, y, z)]
    }

    pub fn into_voxels(self) -> Vec<u8> {
        self.voxels
    }

    pub fn with_case_id(mut self, case_id: impl Into<String>) -> Self {
        self.meta.case_id = case_id.into();
        self
    }

    /// Binary mask of voxels carrying exactly `class`.
    pub fn class_mask(&self, class: u8) -> Mask {
        Mask::from_fn(self.meta.dims, |i| self.voxels[i] == class)
    }

    /// One-hot probability volume with `num_classes` channels.
    pub fn one_hot(&self) -> ProbVolume {
        let n = self.meta.dims.len();
        let c = self.num_classes as usize;
        let mut probs = vec![0.0; n * c];
        for (i, &l) in self.voxels.iter().enumerate() {
            probs[l as usize * n + i] = 1.0;
        }
        ProbVolume {
            meta: self.meta.clone(),
            channels: c,
            probs,
        }
    }
}

/// Per-voxel class probabilities, channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVolume {
    meta: VolumeMeta,
    channels: usize,
    probs: Vec<f64>,
}

impl ProbVolume {
    /// Validates shape and that every value is finite and within `[0, 1]`.
    pub fn new(meta: VolumeMeta, channels: usize, probs: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Data(
                "probability volume needs at least one channel".into(),
            ));
        }
        let expected = meta.dims.len() * channels;
        if probs.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} values for {} x {channels} channels, got {}",
                meta.dims,
                probs.len()
            )));
        }
        if let Some((i, v)) = probs
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(Error::Data(format!(
                "probability {v} at flat index {i} is not a finite value in [0, 1]"
            )));
        }
        Ok(ProbVolume {
            meta,
            channels,
            probs,
        })
    }

    pub(crate) fn from_parts_unchecked(meta: VolumeMeta, channels: usize, probs: Vec<f64>) -> Self {
        ProbVolume {
            meta,
            channels,
            probs,
        }
    }

    pub fn meta(&self) -> &VolumeMeta {
        &self.meta
    }

    pub fn dims(&self) -> Dims {
        self.meta.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.meta.dims.len();
        &self.probs[c * n..(c + 1) * n]
    }

    pub fn get(&self, voxel: usize, c: usize) -> f64 {
        self.probs[c * self.meta.dims.len() + voxel]
    }

    pub fn with_case_id(mut self, case_id: impl Into<String>) -> Self {
        self.meta.case_id = case_id.into();
        self
    }

    /// Rescales every voxel so its channels sum to one.
    ///
    /// A voxel whose channels are all zero is reported as an error rather
    /// than replaced by a uniform distribution.
    pub fn normalize(&self) -> Result<ProbVolume> {
        let n = self.meta.dims.len();
        let mut out = self.probs.clone();
        for v in 0..n {
            let sum: f64 = (0..self.channels).map(|c| self.probs[c * n + v]).sum();
            if sum <= 0.0 {
                return Err(Error::DegenerateVoxel { index: v });
            }
            for c in 0..self.channels {
                out[c * n + v] = self.probs[c * n + v] / sum;
            }
        }
        Ok(ProbVolume {
            meta: self.meta.clone(),
            channels: self.channels,
            probs: out,
        })
    }

    /// Largest per-voxel deviation of the channel sum from one.
    pub fn max_sum_deviation(&self) -> f64 {
        let n = self.meta.dims.len();
        (0..n)
            .map(|v| {
                let s: f64 = (0..self.channels).map(|c| self.probs[c * n + v]).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Class of maximum probability per voxel; ties go to the lowest class index.
    pub fn argmax_labels(&self) -> LabelVolume {
        let n = self.meta.dims.len();
        let voxels = (0..n)
            .map(|v| {
                let mut best = 0usize;
                let mut best_p = self.probs[v];
                for c in 1..self.channels {
                    let p = self.probs[c * n + v];
                    if p > best_p {
                        best = c;
                        best_p = p;
                    }
                }
                best as u8
            })
            .collect();
        LabelVolume {
            meta: self.meta.clone(),
            num_classes: self.channels.min(u8::MAX as usize) as u8,
            voxels,
        }
    }
}

/// Dense binary mask over a voxel grid.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mask {
    dims: Dims,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(dims: Dims, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != dims.len() {
            return Err(Error::Shape(format!(
                "expected {} mask voxels for {dims}, got {}",
                dims.len(),
                bits.len()
            )));
        }
        Ok(Mask { dims, bits })
    }

    pub fn empty(dims: Dims) -> Self {
        Mask {
            dims,
            bits: vec![false; dims.len()],
        }
    }

    pub fn full(dims: Dims) -> Self {
        Mask {
            dims,
            bits: vec![true; dims.len()],
        }
    }

    pub fn from_fn(dims: Dims, f: impl FnMut(usize) -> bool) -> Self {
        Mask {
            dims,
            bits: (0..dims.len()).map(f).collect(),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    #[inline]
    pub fn get_xyz(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.dims.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn set_xyz(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.dims.index(x, y, z);
        self.bits[i] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn iter_set(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.then_some(i))
    }

    pub fn complement(&self) -> Mask {
        Mask {
            dims: self.dims,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn and(&self, other: &Mask) -> Mask {
        debug_assert_eq!(self.dims, other.dims);
        Mask {
            dims: self.dims,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| *a && *b)
                .collect(),
        }
    }

    pub fn or(&self, other: &Mask) -> Mask {
        debug_assert_eq!(self.dims, other.dims);
        Mask {
            dims: self.dims,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| *a || *b)
                .collect(),
        }
    }

    pub fn intersection_count(&self, other: &Mask) -> usize {
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| **a && **b)
            .count()
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.dims == other.dims && self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }
}

/// A composite tumor region: the union of a set of foreground labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub name: String,
    pub labels: Vec<u8>,
}

impl RegionSpec {
    pub fn new(name: impl Into<String>, labels: impl Into<Vec<u8>>) -> Self {
        RegionSpec {
            name: name.into(),
            labels: labels.into(),
        }
    }

    pub fn enhancing_tumor() -> Self {
        RegionSpec::new("enhancing_tumor", [3])
    }

    pub fn tumor_core() -> Self {
        RegionSpec::new("tumor_core", [1, 3])
    }

    pub fn whole_tumor() -> Self {
        RegionSpec::new("whole_tumor", [1, 2, 3])
    }

    /// ET, TC, WT in report order.
    pub fn brats() -> Vec<RegionSpec> {
        vec![
            RegionSpec::enhancing_tumor(),
            RegionSpec::tumor_core(),
            RegionSpec::whole_tumor(),
        ]
    }

    pub fn validate(&self, num_classes: u8) -> Result<()> {
        if self.labels.is_empty() {
            return Err(Error::Spec(format!("region `{}` has no labels", self.name)));
        }
        for &l in &self.labels {
            if l == 0 || l >= num_classes {
                return Err(Error::Spec(format!(
                    "region `{}` names label {l}, outside 1..{num_classes}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Binary mask of voxels whose label belongs to `region`.
pub fn region_mask(labels: &LabelVolume, region: &RegionSpec) -> Result<Mask> {
    region.validate(labels.num_classes())?;
    let mut member = [false; 256];
    for &l in &region.labels {
        member[l as usize] = true;
    }
    Ok(Mask::from_fn(labels.dims(), |i| {
        member[labels.voxels()[i] as usize]
    }))
}
