//! Bilinear rotation about the image centre.
//!
//! `rotate(img, θ)` turns streaks slanted by `θ` (measured from vertical,
//! positive when the streak drifts right while falling) into vertical streaks.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UdgError};
use crate::image::{reflect_index, ImageGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum FillPolicy {
    /// Symmetric mirror at the border.
    #[default]
    Reflect,
    /// Nearest edge sample.
    Edge,
    /// Fixed value outside the frame.
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationSpec {
    pub angle_degrees: f64,
    #[serde(default)]
    pub fill: FillPolicy,
}

impl RotationSpec {
    pub fn new(angle_degrees: f64) -> Self {
        Self {
            angle_degrees,
            fill: FillPolicy::Reflect,
        }
    }

    pub fn with_fill(mut self, fill: FillPolicy) -> Self {
        self.fill = fill;
        self
    }

    pub fn inverse(&self) -> Self {
        Self {
            angle_degrees: -self.angle_degrees,
            fill: self.fill,
        }
    }
}

/// Maps any angle onto the line-direction range `(-90, 90]`.
pub fn canonical_angle(deg: f64) -> f64 {
    let m = deg.rem_euclid(180.0);
    if m > 90.0 {
        m - 180.0
    } else {
        m
    }
}

/// Smallest difference between two line directions, in `[0, 90]`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    canonical_angle(a - b).abs()
}

fn sin_cos_degrees(deg: f64) -> (f64, f64) {
    // Quarter turns are snapped so axis-aligned rotations are pure permutations.
    let quarter = deg / 90.0;
    if (quarter - quarter.round()).abs() < 1e-12 {
        match (quarter.round() as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        deg.to_radians().sin_cos()
    }
}

#[inline]
fn fetch(img: &ImageGrid, i: isize, j: isize, fill: FillPolicy) -> f64 {
    let (h, w) = img.dims();
    let inside = i >= 0 && j >= 0 && (i as usize) < h && (j as usize) < w;
    if inside {
        return img.get(i as usize, j as usize);
    }
    match fill {
        FillPolicy::Reflect => img.get(reflect_index(i, h), reflect_index(j, w)),
        FillPolicy::Edge => img.get(
            i.clamp(0, h as isize - 1) as usize,
            j.clamp(0, w as isize - 1) as usize,
        ),
        FillPolicy::Constant(c) => c,
    }
}

/// Bilinear sample at fractional `(row, col)`.
#[inline]
pub fn sample_bilinear(img: &ImageGrid, y: f64, x: f64, fill: FillPolicy) -> f64 {
    let y0 = y.floor();
    let x0 = x.floor();
    let fy = y - y0;
    let fx = x - x0;
    let (i, j) = (y0 as isize, x0 as isize);
    let a = fetch(img, i, j, fill);
    let b = fetch(img, i, j + 1, fill);
    let c = fetch(img, i + 1, j, fill);
    let d = fetch(img, i + 1, j + 1, fill);
    let top = a + fx * (b - a);
    let bot = c + fx * (d - c);
    top + fy * (bot - top)
}

/// Same-size rotation about the centre with bilinear resampling.
pub fn rotate(img: &ImageGrid, spec: &RotationSpec) -> Result<ImageGrid> {
    let angle = spec.angle_degrees;
    if !angle.is_finite() || angle.abs() > 90.0 {
        return Err(UdgError::InvalidInput(format!(
            "rotation angle {angle} outside [-90, 90]"
        )));
    }
    if angle == 0.0 {
        return Ok(img.clone());
    }
    let (h, w) = img.dims();
    let (s, c) = sin_cos_degrees(angle);
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    Ok(ImageGrid::from_fn(h, w, |i, j| {
        let dy = i as f64 - cy;
        let dx = j as f64 - cx;
        let sx = cx + c * dx + s * dy;
        let sy = cy - s * dx + c * dy;
        sample_bilinear(img, sy, sx, spec.fill)
    }))
}

/// A padded working canvas large enough that rotating the original frame
/// in and back out never samples outside the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedFrame {
    pub spec: RotationSpec,
    height: usize,
    width: usize,
    pad_top: usize,
    pad_left: usize,
    pad_bottom: usize,
    pad_right: usize,
}

impl RotatedFrame {
    pub fn new(height: usize, width: usize, spec: RotationSpec) -> Self {
        let (s, c) = sin_cos_degrees(spec.angle_degrees);
        let (s, c) = (s.abs(), c.abs());
        let (hf, wf) = (height as f64, width as f64);
        // Bounding box of the rotated frame, plus a 2-px guard for the
        // bilinear footprint.
        let need_h = if spec.angle_degrees == 0.0 {
            height
        } else {
            (hf * c + wf * s).ceil() as usize + 4
        };
        let need_w = if spec.angle_degrees == 0.0 {
            width
        } else {
            (wf * c + hf * s).ceil() as usize + 4
        };
        let canvas = need_h.max(need_w).max(height).max(width);
        let (ch, cw) = if spec.angle_degrees == 0.0 {
            (height, width)
        } else {
            (canvas, canvas)
        };
        let pad_h = ch - height;
        let pad_w = cw - width;
        Self {
            spec,
            height,
            width,
            pad_top: pad_h / 2,
            pad_left: pad_w / 2,
            pad_bottom: pad_h - pad_h / 2,
            pad_right: pad_w - pad_w / 2,
        }
    }

    pub fn canvas_dims(&self) -> (usize, usize) {
        (
            self.height + self.pad_top + self.pad_bottom,
            self.width + self.pad_left + self.pad_right,
        )
    }

    /// Pads (reflect) and rotates into the streak-upright frame.
    pub fn enter(&self, img: &ImageGrid) -> Result<ImageGrid> {
        if img.dims() != (self.height, self.width) {
            return Err(UdgError::InvalidInput(format!(
                "frame built for {}x{}, got {}x{}",
                self.height,
                self.width,
                img.height(),
                img.width()
            )));
        }
        let padded = img.pad_reflect(self.pad_top, self.pad_left, self.pad_bottom, self.pad_right);
        rotate(&padded, &self.spec)
    }

    /// Rotates back and crops to the original frame.
    pub fn leave(&self, img: &ImageGrid) -> Result<ImageGrid> {
        if img.dims() != self.canvas_dims() {
            return Err(UdgError::InvalidInput("canvas size mismatch".into()));
        }
        let back = rotate(img, &self.spec.inverse())?;
        back.crop(self.pad_top, self.pad_left, self.height, self.width)
    }
}
