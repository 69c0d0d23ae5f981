//! Scalar image planes and the forward-difference operators used by every
//! other module.
//!
//! Axis naming follows the rain geometry once the streaks have been rotated
//! upright: `Along` differentiates down the rows (along a vertical streak),
//! `Across` differentiates along the columns (across the streak).

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Result, UdgError};

/// A row-major plane of `f64` intensities.
///
/// Values are nominally in `[0, 1]` but intermediate layers (rain estimates,
/// residuals, multipliers) are signed, so no clamping happens here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ImageGrid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(UdgError::InvalidInput(format!(
                "empty image {height}x{width}"
            )));
        }
        if values.len() != height * width {
            return Err(UdgError::InvalidInput(format!(
                "expected {} values for {height}x{width}, got {}",
                height * width,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(UdgError::InvalidInput(format!(
                "non-finite value at ({}, {})",
                pos / width,
                pos % width
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "empty image");
        Self {
            height,
            width,
            values: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "empty image");
        let mut values = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                values.push(f(i, j));
            }
        }
        Self {
            height,
            width,
            values,
        }
    }

    /// Builds a grid from values the caller guarantees to be finite and
    /// correctly sized.
    pub(crate) fn from_raw(height: usize, width: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), height * width);
        Self {
            height,
            width,
            values,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.width + j]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_dims(&self, other: &ImageGrid) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(UdgError::DimensionMismatch {
                left_h: self.height,
                left_w: self.width,
                right_h: other.height,
                right_w: other.width,
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageGrid {
        Self::from_raw(
            self.height,
            self.width,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Elementwise combination. Panics on mismatched dimensions; public
    /// callers validate with [`ImageGrid::same_dims`] first.
    pub fn zip_map(&self, other: &ImageGrid, f: impl Fn(f64, f64) -> f64) -> ImageGrid {
        assert_eq!(self.dims(), other.dims(), "dimension mismatch");
        Self::from_raw(
            self.height,
            self.width,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &ImageGrid) -> ImageGrid {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ImageGrid) -> ImageGrid {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, k: f64) -> ImageGrid {
        self.map(|v| k * v)
    }

    pub fn clamp01(&self) -> ImageGrid {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn sq_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &ImageGrid) -> f64 {
        assert_eq!(self.dims(), other.dims(), "dimension mismatch");
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<ImageGrid> {
        if height == 0 || width == 0 || top + height > self.height || left + width > self.width {
            return Err(UdgError::InvalidInput(format!(
                "crop {height}x{width}+{top}+{left} outside {}x{}",
                self.height, self.width
            )));
        }
        Ok(Self::from_fn(height, width, |i, j| {
            self.get(top + i, left + j)
        }))
    }

    /// Central crop keeping `fraction` of each side.
    pub fn center_crop(&self, fraction: f64) -> ImageGrid {
        let h = ((self.height as f64 * fraction).round() as usize).clamp(1, self.height);
        let w = ((self.width as f64 * fraction).round() as usize).clamp(1, self.width);
        let top = (self.height - h) / 2;
        let left = (self.width - w) / 2;
        self.crop(top, left, h, w).expect("crop is in bounds")
    }

    /// Pads with symmetric (half-sample) reflection.
    pub fn pad_reflect(&self, top: usize, left: usize, bottom: usize, right: usize) -> ImageGrid {
        let h = self.height + top + bottom;
        let w = self.width + left + right;
        Self::from_fn(h, w, |i, j| {
            let si = reflect_index(i as isize - top as isize, self.height);
            let sj = reflect_index(j as isize - left as isize, self.width);
            self.get(si, sj)
        })
    }
}

impl Index<(usize, usize)> for ImageGrid {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.values[i * self.width + j]
    }
}

impl IndexMut<(usize, usize)> for ImageGrid {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.values[i * self.width + j]
    }
}

/// Symmetric reflection `-1 -> 0, -2 -> 1, n -> n-1`, valid for any offset.
pub(crate) fn reflect_index(k: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = k.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

fn gaussian_kernels(sigma: f64) -> (isize, Vec<f64>, Vec<f64>) {
    let radius = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = taps.iter().sum();
    let smooth: Vec<f64> = taps.iter().map(|t| t / norm).collect();
    // Derivative taps scaled so a unit ramp has unit response.
    let raw: Vec<f64> = (-radius..=radius).zip(&taps).map(|(k, t)| -(k as f64) * t).collect();
    let ramp: f64 = (-radius..=radius).zip(&raw).map(|(k, d)| -(k as f64) * d).sum();
    let deriv = raw.iter().map(|d| d / ramp).collect();
    (radius, smooth, deriv)
}

fn convolve_rows(img: &ImageGrid, radius: isize, kernel: &[f64]) -> ImageGrid {
    let (h, w) = img.dims();
    ImageGrid::from_fn(h, w, |i, j| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, &wt)| wt * img.get(i, reflect_index(j as isize + radius - k as isize, w)))
            .sum()
    })
}

fn convolve_cols(img: &ImageGrid, radius: isize, kernel: &[f64]) -> ImageGrid {
    let (h, w) = img.dims();
    ImageGrid::from_fn(h, w, |i, j| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, &wt)| wt * img.get(reflect_index(i as isize + radius - k as isize, h), j))
            .sum()
    })
}

/// Separable Gaussian blur with reflected borders; kernel radius `⌈3σ⌉`.
pub fn gaussian_blur(img: &ImageGrid, sigma: f64) -> ImageGrid {
    let (radius, smooth, _) = gaussian_kernels(sigma);
    convolve_cols(&convolve_rows(img, radius, &smooth), radius, &smooth)
}

/// Derivative-of-Gaussian gradient `(∂/∂row, ∂/∂col)`, reflected borders.
/// Nearly rotation-invariant for `σ ≥ 1`, unlike plain finite differences.
pub fn gaussian_gradient(img: &ImageGrid, sigma: f64) -> (ImageGrid, ImageGrid) {
    let (radius, smooth, deriv) = gaussian_kernels(sigma);
    let d_row = convolve_cols(&convolve_rows(img, radius, &smooth), radius, &deriv);
    let d_col = convolve_rows(&convolve_cols(img, radius, &smooth), radius, &deriv);
    (d_row, d_col)
}

/// Differentiation direction relative to the (upright) rain streaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Down the rows: `img[i+1, j] - img[i, j]`.
    Along,
    /// Along the columns: `img[i, j+1] - img[i, j]`.
    Across,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Circulant wrap-around. Required wherever the result feeds an FFT solve.
    Periodic,
    /// Last difference is zero (edge sample replicated).
    Replicate,
}

fn check_extent(img: &ImageGrid, dir: Direction) -> Result<()> {
    let n = match dir {
        Direction::Along => img.height,
        Direction::Across => img.width,
    };
    if n < 2 {
        return Err(UdgError::InvalidInput(format!(
            "need at least 2 samples along {dir:?}, got {n}"
        )));
    }
    Ok(())
}

/// Forward difference `out[p] = img[next(p)] - img[p]`.
pub fn grad_forward(img: &ImageGrid, dir: Direction, boundary: Boundary) -> Result<ImageGrid> {
    check_extent(img, dir)?;
    let (h, w) = img.dims();
    let v = img.values();
    let mut out = vec![0.0; h * w];
    match dir {
        Direction::Along => {
            for i in 0..h {
                let next = if i + 1 < h {
                    Some(i + 1)
                } else if boundary == Boundary::Periodic {
                    Some(0)
                } else {
                    None
                };
                if let Some(n) = next {
                    let (row, nrow) = (&v[i * w..(i + 1) * w], &v[n * w..(n + 1) * w]);
                    for (o, (a, b)) in out[i * w..(i + 1) * w].iter_mut().zip(row.iter().zip(nrow)) {
                        *o = b - a;
                    }
                }
            }
        }
        Direction::Across => {
            for i in 0..h {
                let row = &v[i * w..(i + 1) * w];
                let o = &mut out[i * w..(i + 1) * w];
                for j in 0..w - 1 {
                    o[j] = row[j + 1] - row[j];
                }
                if boundary == Boundary::Periodic {
                    o[w - 1] = row[0] - row[w - 1];
                }
            }
        }
    }
    Ok(ImageGrid::from_raw(h, w, out))
}

/// Adjoint of the periodic forward difference: `out[p] = img[prev(p)] - img[p]`.
pub fn grad_adjoint(img: &ImageGrid, dir: Direction) -> Result<ImageGrid> {
    check_extent(img, dir)?;
    let (h, w) = img.dims();
    let v = img.values();
    let mut out = vec![0.0; h * w];
    match dir {
        Direction::Along => {
            for i in 0..h {
                let p = if i == 0 { h - 1 } else { i - 1 };
                for j in 0..w {
                    out[i * w + j] = v[p * w + j] - v[i * w + j];
                }
            }
        }
        Direction::Across => {
            for i in 0..h {
                let row = &v[i * w..(i + 1) * w];
                let o = &mut out[i * w..(i + 1) * w];
                o[0] = row[w - 1] - row[0];
                for j in 1..w {
                    o[j] = row[j - 1] - row[j];
                }
            }
        }
    }
    Ok(ImageGrid::from_raw(h, w, out))
}

/// Both derivative planes of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair {
    pub d_along: ImageGrid,
    pub d_across: ImageGrid,
}

impl GradientPair {
    pub fn of(img: &ImageGrid, boundary: Boundary) -> Result<Self> {
        Ok(Self {
            d_along: grad_forward(img, Direction::Along, boundary)?,
            d_across: grad_forward(img, Direction::Across, boundary)?,
        })
    }

    /// `‖d_along‖₁ + ‖d_across‖₁`, the relaxed (two-axis) total variation.
    pub fn l1(&self) -> f64 {
        self.d_along.l1_norm() + self.d_across.l1_norm()
    }
}

/// Two-axis anisotropic total variation with periodic boundary.
pub fn total_variation(img: &ImageGrid) -> Result<f64> {
    Ok(GradientPair::of(img, Boundary::Periodic)?.l1())
}
