//! Volumetric multi-scale structural similarity.
//!
//! Statistics are taken under a separable 3D Gaussian window with "valid"
//! extent (no padding). Each coarser scale is a 2x average pooling of the
//! previous one, dropping a trailing odd voxel. The score is
//! `prod_{j < S-1} cs_j^w * ssim_{S-1}^w` with equal exponents `w = 1/S`,
//! where negative per-scale terms are clamped to zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Dims;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsSsimConfig {
    /// Window edge length in voxels; odd and at least 3.
    pub window: usize,
    pub sigma: f64,
    /// Requested number of scales; reduced when the volume is too small.
    pub scales: usize,
    pub k1: f64,
    pub k2: f64,
    pub data_range: f64,
}

impl Default for MsSsimConfig {
    fn default() -> Self {
        MsSsimConfig {
            window: 7,
            sigma: 1.5,
            scales: 3,
            k1: 0.01,
            k2: 0.03,
            data_range: 1.0,
        }
    }
}

impl MsSsimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "msssim.window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Config(format!(
                "msssim.sigma must be > 0, got {}",
                self.sigma
            )));
        }
        if self.scales == 0 {
            return Err(Error::Config("msssim.scales must be >= 1".into()));
        }
        for (name, v) in [
            ("k1", self.k1),
            ("k2", self.k2),
            ("data_range", self.data_range),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("msssim.{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Number of scales actually used for a volume of the given size.
    pub fn effective_scales(&self, dims: Dims) -> Result<usize> {
        self.validate()?;
        let min_dim = dims.nx.min(dims.ny).min(dims.nz);
        if min_dim < self.window {
            return Err(Error::Config(format!(
                "volume {dims} is smaller than the {}-voxel msssim window",
                self.window
            )));
        }
        let mut scales = self.scales;
        while scales > 1 && min_dim < self.window << (scales - 1) {
            scales -= 1;
        }
        Ok(scales)
    }

    pub fn kernel(&self) -> Vec<f64> {
        let r = (self.window / 2) as f64;
        let raw: Vec<f64> = (0..self.window)
            .map(|k| {
                let d = k as f64 - r;
                (-d * d / (2.0 * self.sigma * self.sigma)).exp()
            })
            .collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / sum).collect()
    }
}

/// Mean SSIM and mean contrast-structure term at a single scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleStats {
    pub ssim: f64,
    pub cs: f64,
}

/// Multi-scale SSIM of two equally sized volumes.
pub fn ms_ssim(x: &[f64], y: &[f64], dims: Dims, cfg: &MsSsimConfig) -> Result<f64> {
    let per_scale = ms_ssim_scales(x, y, dims, cfg)?;
    let weight = 1.0 / per_scale.len() as f64;
    let last = per_scale.len() - 1;
    let mut score = 1.0;
    for (j, s) in per_scale.iter().enumerate() {
        let term = if j == last { s.ssim } else { s.cs };
        score *= term.max(0.0).powf(weight);
    }
    Ok(score)
}

/// Per-scale statistics, finest scale first.
pub fn ms_ssim_scales(
    x: &[f64],
    y: &[f64],
    dims: Dims,
    cfg: &MsSsimConfig,
) -> Result<Vec<ScaleStats>> {
    if x.len() != dims.len() || y.len() != dims.len() {
        return Err(Error::Shape(format!(
            "msssim inputs of {} and {} voxels for {dims}",
            x.len(),
            y.len()
        )));
    }
    let scales = cfg.effective_scales(dims)?;
    let kernel = cfg.kernel();
    let c1 = (cfg.k1 * cfg.data_range).powi(2);
    let c2 = (cfg.k2 * cfg.data_range).powi(2);

    let mut out = Vec::with_capacity(scales);
    let mut dims = dims;
    let mut x = x.to_vec();
    let mut y = y.to_vec();
    for j in 0..scales {
        out.push(single_scale(&x, &y, dims, &kernel, c1, c2));
        if j + 1 < scales {
            let (nx, nd) = pool2(&x, dims);
            let (ny, _) = pool2(&y, dims);
            x = nx;
            y = ny;
            dims = nd;
        }
    }
    Ok(out)
}

fn single_scale(x: &[f64], y: &[f64], dims: Dims, kernel: &[f64], c1: f64, c2: f64) -> ScaleStats {
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();

    let (mu_x, out_dims) = filter_valid(x, dims, kernel);
    let (mu_y, _) = filter_valid(y, dims, kernel);
    let (e_xx, _) = filter_valid(&xx, dims, kernel);
    let (e_yy, _) = filter_valid(&yy, dims, kernel);
    let (e_xy, _) = filter_valid(&xy, dims, kernel);

    let n = out_dims.len() as f64;
    let mut ssim_sum = 0.0;
    let mut cs_sum = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let var_x = e_xx[i] - mx * mx;
        let var_y = e_yy[i] - my * my;
        let cov = e_xy[i] - mx * my;
        let cs = (2.0 * cov + c2) / (var_x + var_y + c2);
        let lum = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
        cs_sum += cs;
        ssim_sum += lum * cs;
    }
    ScaleStats {
        ssim: ssim_sum / n,
        cs: cs_sum / n,
    }
}

/// Separable correlation with `kernel` along each axis, keeping only fully
/// covered positions.
fn filter_valid(src: &[f64], dims: Dims, kernel: &[f64]) -> (Vec<f64>, Dims) {
    let w = kernel.len();
    let (nx, ny, nz) = (dims.nx, dims.ny, dims.nz);

    let ox = nx - w + 1;
    let mut a = vec![0.0; ox * ny * nz];
    for z in 0..nz {
        for y in 0..ny {
            let row = &src[(y + ny * z) * nx..][..nx];
            let dst = &mut a[(y + ny * z) * ox..][..ox];
            for (xo, d) in dst.iter_mut().enumerate() {
                *d = kernel
                    .iter()
                    .zip(&row[xo..xo + w])
                    .map(|(k, v)| k * v)
                    .sum();
            }
        }
    }

    let oy = ny - w + 1;
    let mut b = vec![0.0; ox * oy * nz];
    for z in 0..nz {
        for yo in 0..oy {
            for x in 0..ox {
                let mut s = 0.0;
                for (k, kv) in kernel.iter().enumerate() {
                    s += kv * a[x + ox * (yo + k + ny * z)];
                }
                b[x + ox * (yo + oy * z)] = s;
            }
        }
    }

    let oz = nz - w + 1;
    let mut c = vec![0.0; ox * oy * oz];
    for zo in 0..oz {
        for y in 0..oy {
            for x in 0..ox {
                let mut s = 0.0;
                for (k, kv) in kernel.iter().enumerate() {
                    s += kv * b[x + ox * (y + oy * (zo + k))];
                }
                c[x + ox * (y + oy * zo)] = s;
            }
        }
    }
    (c, Dims::new(ox, oy, oz))
}

fn pool2(src: &[f64], dims: Dims) -> (Vec<f64>, Dims) {
    let out = Dims::new(dims.nx / 2, dims.ny / 2, dims.nz / 2);
    let mut dst = vec![0.0; out.len()];
    for z in 0..out.nz {
        for y in 0..out.ny {
            for x in 0..out.nx {
                let mut s = 0.0;
                for dz in 0..2 {
                    for dy in 0..2 {
                        for dx in 0..2 {
                            s += src[dims.index(2 * x + dx, 2 * y + dy, 2 * z + dz)];
                        }
                    }
                }
                dst[out.index(x, y, z)] = s / 8.0;
            }
        }
    }
    (dst, out)
}
