//! Axis-aligned slice rendering of label volumes to binary PPM (P6).
//!
//! Palette: background black, 1 red, 2 green, 3 yellow; any higher label is
//! white. Panels are placed left to right with a 2-pixel grey separator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::LabelVolume;

pub const SEPARATOR_PX: usize = 2;
pub const SEPARATOR_RGB: [u8; 3] = [128, 128, 128];
pub const PALETTE: [[u8; 3]; 4] = [[0, 0, 0], [255, 0, 0], [0, 200, 0], [255, 255, 0]];
const OTHER_RGB: [u8; 3] = [255, 255, 255];

/// Axis normal to the rendered slice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Sagittal: image columns run along y, rows along z.
    X,
    /// Coronal: columns along x, rows along z.
    Y,
    /// Axial: columns along x, rows along y.
    Z,
}

pub fn label_color(label: u8) -> [u8; 3] {
    PALETTE.get(label as usize).copied().unwrap_or(OTHER_RGB)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB triples.
    pub pixels: Vec<u8>,
}

impl RgbImage {
    pub fn pixel(&self, col: usize, row: usize) -> [u8; 3] {
        let o = 3 * (row * self.width + col);
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Renders slice `index` along `axis` of each volume side by side.
pub fn render_slices(volumes: &[&LabelVolume], axis: Axis, index: usize) -> Result<RgbImage> {
    let first = volumes
        .first()
        .ok_or_else(|| Error::Precondition("nothing to render".into()))?;
    let dims = first.dims();
    for v in volumes.iter().skip(1) {
        if v.dims() != dims {
            return Err(Error::Shape(format!("{} vs {}", dims, v.dims())));
        }
    }
    let (depth, w, h) = match axis {
        Axis::X => (dims.nx, dims.ny, dims.nz),
        Axis::Y => (dims.ny, dims.nx, dims.nz),
        Axis::Z => (dims.nz, dims.nx, dims.ny),
    };
    if index >= depth {
        return Err(Error::Precondition(format!(
            "slice {index} out of range for axis {axis:?} with {depth} slices"
        )));
    }
    let panels = volumes.len();
    let width = panels * w + (panels - 1) * SEPARATOR_PX;
    let mut pixels = Vec::with_capacity(width * h * 3);
    for row in 0..h {
        for (p, vol) in volumes.iter().enumerate() {
            if p > 0 {
                for _ in 0..SEPARATOR_PX {
                    pixels.extend_from_slice(&SEPARATOR_RGB);
                }
            }
            for col in 0..w {
                let (x, y, z) = match axis {
                    Axis::X => (index, col, row),
                    Axis::Y => (col, index, row),
                    Axis::Z => (col, row, index),
                };
                pixels.extend_from_slice(&label_color(vol.get(x, y, z)));
            }
        }
    }
    Ok(RgbImage {
        width,
        height: h,
        pixels,
    })
}
