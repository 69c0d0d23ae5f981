//! 2-D FFT plumbing for the circulant solves.
//!
//! A [`Fft2`] owns its plans and scratch buffers, so each solver instance
//! carries its own and nothing is shared across threads.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::image::{Direction, ImageGrid};

pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    column: Vec<Complex64>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("height", &self.height)
            .field("width", &self.width)
            .finish()
    }
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
            column: vec![Complex64::default(); height],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn columns(&mut self, buf: &mut [Complex64], inverse: bool) {
        let (h, w) = (self.height, self.width);
        let plan = if inverse { &self.col_inv } else { &self.col_fwd };
        for j in 0..w {
            for i in 0..h {
                self.column[i] = buf[i * w + j];
            }
            plan.process(&mut self.column);
            for i in 0..h {
                buf[i * w + j] = self.column[i];
            }
        }
    }

    pub fn forward(&mut self, img: &ImageGrid) -> Vec<Complex64> {
        debug_assert_eq!(img.dims(), self.dims());
        let mut buf: Vec<Complex64> = img.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.row_fwd.process(&mut buf);
        self.columns(&mut buf, false);
        buf
    }

    /// Inverse transform, returning the real part and the largest absolute
    /// imaginary residue (after normalisation).
    pub fn inverse_real(&mut self, mut buf: Vec<Complex64>) -> (ImageGrid, f64) {
        self.columns(&mut buf, true);
        self.row_inv.process(&mut buf);
        let scale = 1.0 / (self.height * self.width) as f64;
        let mut max_imag: f64 = 0.0;
        let values = buf
            .iter()
            .map(|c| {
                max_imag = max_imag.max((c.im * scale).abs());
                c.re * scale
            })
            .collect();
        (ImageGrid::from_raw(self.height, self.width, values), max_imag)
    }
}

/// `|F(d)|²` for the periodic forward difference in `dir`, laid out on the
/// full `height x width` frequency grid.
///
/// For a first difference the transfer function is `e^{iω} - 1`, so the
/// squared magnitude is `2 - 2 cos ω`.
pub fn difference_spectrum(height: usize, width: usize, dir: Direction) -> Vec<f64> {
    let mut out = vec![0.0; height * width];
    for u in 0..height {
        for v in 0..width {
            out[u * width + v] = match dir {
                Direction::Along => 2.0 - 2.0 * (2.0 * PI * u as f64 / height as f64).cos(),
                Direction::Across => 2.0 - 2.0 * (2.0 * PI * v as f64 / width as f64).cos(),
            };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{grad_forward, Boundary};

    #[test]
    fn round_trip() {
        let img = ImageGrid::from_fn(6, 10, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.1);
        let mut fft = Fft2::new(6, 10);
        let spec = fft.forward(&img);
        let (back, imag) = fft.inverse_real(spec);
        assert!(imag < 1e-12);
        assert!(back.sub(&img).max_abs() < 1e-12);
    }

    #[test]
    fn spectrum_matches_transformed_kernel() {
        // |F(d δ)|² computed by transforming the difference of a delta.
        let (h, w) = (8, 12);
        let mut fft = Fft2::new(h, w);
        let mut delta = ImageGrid::zeros(h, w);
        delta[(0, 0)] = 1.0;
        for dir in [Direction::Along, Direction::Across] {
            let kernel = grad_forward(&delta, dir, Boundary::Periodic).unwrap();
            let spec = fft.forward(&kernel);
            let analytic = difference_spectrum(h, w, dir);
            for (c, a) in spec.iter().zip(&analytic) {
                assert!((c.norm_sqr() - a).abs() < 1e-12);
            }
        }
    }
}
