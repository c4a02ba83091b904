//! Deterministic synthetic cases: rasterized ground truth plus noisy
//! per-member probability volumes.
//!
//! Randomness comes from ChaCha8 seeded with `seed`; member `m` draws from
//! stream `m`, so members can be generated independently and in any order.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Dims, LabelVolume, ProbVolume, VolumeMeta, BRATS_CLASSES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Geometry {
    /// Voxels whose centre lies within `radius` voxels of the shape centre.
    Sphere { radius: f64 },
    /// Voxels within `half_extent[k]` voxels of the centre along each axis.
    Box { half_extent: [f64; 3] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shape {
    pub class: u8,
    pub geometry: Geometry,
    /// Centre in voxel coordinates.
    pub center: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub case_id: String,
    pub seed: u64,
    pub dims: Dims,
    pub spacing: [f64; 3],
    #[serde(default = "default_classes")]
    pub num_classes: u8,
    /// Rasterized in order; later shapes overwrite earlier ones.
    pub shapes: Vec<Shape>,
    /// Perturbation amplitude in `[0, 0.5)`.
    pub noise: f64,
    pub n_models: usize,
}

fn default_classes() -> u8 {
    BRATS_CLASSES
}

impl SynthSpec {
    /// A nested edema / core / enhancing lesion centred in a cube plus a
    /// second, smaller lesion in one corner.
    pub fn brats_like(
        case_id: impl Into<String>,
        seed: u64,
        n: usize,
        noise: f64,
        n_models: usize,
    ) -> Self {
        let c = (n as f64 - 1.0) / 2.0;
        let r = n as f64 / 5.0;
        let q = n as f64 * 0.78;
        SynthSpec {
            case_id: case_id.into(),
            seed,
            dims: Dims::cube(n),
            spacing: [1.0; 3],
            num_classes: BRATS_CLASSES,
            shapes: vec![
                Shape {
                    class: 2,
                    geometry: Geometry::Sphere { radius: r },
                    center: [c; 3],
                },
                Shape {
                    class: 1,
                    geometry: Geometry::Sphere { radius: r * 0.6 },
                    center: [c; 3],
                },
                Shape {
                    class: 3,
                    geometry: Geometry::Box {
                        half_extent: [r * 0.3; 3],
                    },
                    center: [c + r * 0.2; 3],
                },
                Shape {
                    class: 2,
                    geometry: Geometry::Sphere { radius: r * 0.5 },
                    center: [q; 3],
                },
                Shape {
                    class: 3,
                    geometry: Geometry::Sphere { radius: r * 0.3 },
                    center: [q; 3],
                },
            ],
            noise,
            n_models,
        }
    }

    pub fn validate(&self) -> Result<()> {
        VolumeMeta::new(self.dims, self.spacing, self.case_id.clone())?;
        if !(0.0..0.5).contains(&self.noise) {
            return Err(Error::Spec(format!(
                "noise must lie in [0, 0.5), got {}",
                self.noise
            )));
        }
        if self.n_models == 0 {
            return Err(Error::Spec("n_models must be at least 1".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Spec("num_classes must be at least 2".into()));
        }
        let limit = self.dims.as_array();
        for (k, s) in self.shapes.iter().enumerate() {
            if s.class >= self.num_classes {
                return Err(Error::Spec(format!(
                    "shape {k} has class {} outside 0..{}",
                    s.class, self.num_classes
                )));
            }
            let half = match s.geometry {
                Geometry::Sphere { radius } => [radius; 3],
                Geometry::Box { half_extent } => half_extent,
            };
            for axis in 0..3 {
                let lo = s.center[axis] - half[axis];
                let hi = s.center[axis] + half[axis];
                if !(half[axis] >= 0.0 && lo >= 0.0 && hi <= (limit[axis] - 1) as f64) {
                    return Err(Error::Spec(format!(
                        "shape {k} spans [{lo}, {hi}] on axis {axis}, outside 0..={}",
                        limit[axis] - 1
                    )));
                }
            }
        }
        Ok(())
    }

    fn meta(&self) -> Result<VolumeMeta> {
        VolumeMeta::new(self.dims, self.spacing, self.case_id.clone())
    }
}

impl Shape {
    pub fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        let d = [
            x as f64 - self.center[0],
            y as f64 - self.center[1],
            z as f64 - self.center[2],
        ];
        match self.geometry {
            Geometry::Sphere { radius } => d.iter().map(|v| v * v).sum::<f64>() <= radius * radius,
            Geometry::Box { half_extent } => d.iter().zip(half_extent).all(|(v, h)| v.abs() <= h),
        }
    }
}

/// Rasterizes the ground truth.
pub fn rasterize(spec: &SynthSpec) -> Result<LabelVolume> {
    spec.validate()?;
    let dims = spec.dims;
    let mut voxels = vec![0u8; dims.len()];
    for shape in &spec.shapes {
        for (i, v) in voxels.iter_mut().enumerate() {
            let (x, y, z) = dims.coords(i);
            if shape.contains(x, y, z) {
                *v = shape.class;
            }
        }
    }
    LabelVolume::new(spec.meta()?, spec.num_classes, voxels)
}

/// One member: the one-hot ground truth plus uniform noise of scale
/// `noise / (0.5 - noise)` on every channel, renormalized.
pub fn make_member(spec: &SynthSpec, gt: &LabelVolume, member: usize) -> Result<ProbVolume> {
    let c = spec.num_classes as usize;
    let n = spec.dims.len();
    let scale = spec.noise / (0.5 - spec.noise);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(member as u64);
    let mut probs = vec![0.0; n * c];
    for (v, &label) in gt.voxels().iter().enumerate() {
        let mut sum = 0.0;
        for ch in 0..c {
            let hot = if ch == label as usize { 1.0 } else { 0.0 };
            let p = if scale > 0.0 {
                hot + scale * rng.random::<f64>()
            } else {
                hot
            };
            probs[ch * n + v] = p;
            sum += p;
        }
        for ch in 0..c {
            probs[ch * n + v] /= sum;
        }
    }
    ProbVolume::new(spec.meta()?, c, probs)
}

/// Ground truth and `n_models` member probability volumes.
pub fn make_case(spec: &SynthSpec) -> Result<(LabelVolume, Vec<ProbVolume>)> {
    let gt = rasterize(spec)?;
    let members = (0..spec.n_models)
        .map(|m| make_member(spec, &gt, m))
        .collect::<Result<Vec<_>>>()?;
    Ok((gt, members))
}
