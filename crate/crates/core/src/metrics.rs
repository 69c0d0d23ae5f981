//! Image quality and gradient statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UdgError};
use crate::image::{grad_forward, Boundary, Direction, ImageGrid};

/// Peak signal-to-noise ratio in dB. Identical inputs give `f64::INFINITY`.
pub fn psnr(a: &ImageGrid, b: &ImageGrid, peak: f64) -> Result<f64> {
    a.same_dims(b)?;
    let mse = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
    pub peak: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 8,
            k1: 0.01,
            k2: 0.03,
            peak: 1.0,
        }
    }
}

/// Summed-area table with a zero first row/column.
struct Integral {
    w: usize,
    sums: Vec<f64>,
}

impl Integral {
    fn new(h: usize, w: usize, f: impl Fn(usize) -> f64) -> Self {
        let stride = w + 1;
        let mut sums = vec![0.0; (h + 1) * stride];
        for i in 0..h {
            let mut row = 0.0;
            for j in 0..w {
                row += f(i * w + j);
                sums[(i + 1) * stride + j + 1] = sums[i * stride + j + 1] + row;
            }
        }
        Self { w: stride, sums }
    }

    fn window(&self, i: usize, j: usize, n: usize) -> f64 {
        let s = &self.sums;
        let w = self.w;
        s[(i + n) * w + j + n] - s[i * w + j + n] - s[(i + n) * w + j] + s[i * w + j]
    }
}

/// Mean SSIM over all uniform `window x window` patches (stride 1), using
/// population statistics inside each window.
pub fn ssim(a: &ImageGrid, b: &ImageGrid, params: &SsimParams) -> Result<f64> {
    a.same_dims(b)?;
    let n = params.window;
    let (h, w) = a.dims();
    if n == 0 || h < n || w < n {
        return Err(UdgError::InvalidInput(format!(
            "image {h}x{w} smaller than SSIM window {n}"
        )));
    }
    let (av, bv) = (a.values(), b.values());
    let sa = Integral::new(h, w, |k| av[k]);
    let sb = Integral::new(h, w, |k| bv[k]);
    let saa = Integral::new(h, w, |k| av[k] * av[k]);
    let sbb = Integral::new(h, w, |k| bv[k] * bv[k]);
    let sab = Integral::new(h, w, |k| av[k] * bv[k]);
    let c1 = (params.k1 * params.peak).powi(2);
    let c2 = (params.k2 * params.peak).powi(2);
    let count = (n * n) as f64;
    let mut total = 0.0;
    for i in 0..=h - n {
        for j in 0..=w - n {
            let mu_a = sa.window(i, j, n) / count;
            let mu_b = sb.window(i, j, n) / count;
            let var_a = (saa.window(i, j, n) / count - mu_a * mu_a).max(0.0);
            let var_b = (sbb.window(i, j, n) / count - mu_b * mu_b).max(0.0);
            let cov = sab.window(i, j, n) / count - mu_a * mu_b;
            total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        }
    }
    Ok(total / ((h - n + 1) * (w - n + 1)) as f64)
}

/// Across-to-along gradient energy ratio, replicate boundary.
///
/// Roughly 1 for isotropic content, well above 1 for upright streaks.
pub fn anisotropy_ratio(img: &ImageGrid) -> Result<f64> {
    let across = grad_forward(img, Direction::Across, Boundary::Replicate)?.l1_norm();
    let along = grad_forward(img, Direction::Along, Boundary::Replicate)?.l1_norm();
    Ok(across / (along + 1e-12))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientHistogram {
    pub counts: Vec<u64>,
    pub lo: f64,
    pub hi: f64,
}

impl GradientHistogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_of(&self, value: f64) -> usize {
        let n = self.counts.len();
        let t = (value - self.lo) / (self.hi - self.lo);
        ((t * n as f64).floor() as isize).clamp(0, n as isize - 1) as usize
    }

    pub fn zero_bin(&self) -> usize {
        self.bin_of(0.0)
    }

    pub fn normalized(&self) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }

    /// Fraction of samples in bins lying entirely beyond `|g| > threshold`.
    pub fn tail_mass(&self, threshold: f64) -> f64 {
        let n = self.counts.len() as f64;
        let width = (self.hi - self.lo) / n;
        let total = self.total().max(1) as f64;
        self.counts
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let lo = self.lo + *k as f64 * width;
                let hi = lo + width;
                lo >= threshold || hi <= -threshold
            })
            .map(|(_, &c)| c as f64)
            .sum::<f64>()
            / total
    }
}

/// Histogram of forward differences (replicate boundary) over `[-1, 1]`.
/// Values outside the range land in the end bins.
pub fn gradient_histogram(img: &ImageGrid, dir: Direction, bins: usize) -> Result<GradientHistogram> {
    if bins < 16 {
        return Err(UdgError::InvalidInput(format!("need at least 16 bins, got {bins}")));
    }
    let g = grad_forward(img, dir, Boundary::Replicate)?;
    let mut hist = GradientHistogram {
        counts: vec![0; bins],
        lo: -1.0,
        hi: 1.0,
    };
    for &v in g.values() {
        let k = hist.bin_of(v);
        hist.counts[k] += 1;
    }
    Ok(hist)
}

/// Jensen–Shannon divergence in bits (range `[0, 1]`).
pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "histogram length mismatch");
    let kl = |a: f64, m: f64| if a > 0.0 { a * (a / m).log2() } else { 0.0 };
    p.iter()
        .zip(q)
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            0.5 * kl(a, m) + 0.5 * kl(b, m)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(h: usize, w: usize, seed: u64) -> ImageGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageGrid::from_fn(h, w, |_, _| rng.random::<f64>())
    }

    #[test]
    fn psnr_sentinel_and_offset() {
        let a = random(16, 16, 1);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        let b = a.map(|v| v + 0.1);
        assert!((psnr(&a, &b, 1.0).unwrap() - 20.0).abs() < 1e-9);
        assert!(psnr(&a, &ImageGrid::zeros(8, 8), 1.0).is_err());
    }

    #[test]
    fn ssim_basic() {
        let a = random(24, 20, 2);
        assert!((ssim(&a, &a, &SsimParams::default()).unwrap() - 1.0).abs() < 1e-12);
        let inv = a.map(|v| 1.0 - v);
        assert!(ssim(&a, &inv, &SsimParams::default()).unwrap() < 0.5);
        let small = ImageGrid::zeros(7, 20);
        assert!(ssim(&small, &small, &SsimParams::default()).is_err());
    }

    #[test]
    fn histogram_zero_bin() {
        let img = ImageGrid::filled(10, 10, 0.4);
        let h = gradient_histogram(&img, Direction::Along, 32).unwrap();
        assert_eq!(h.counts[h.zero_bin()], 100);
        assert_eq!(h.total(), 100);
        assert!(gradient_histogram(&img, Direction::Along, 8).is_err());
    }

    #[test]
    fn js_bounds() {
        let p = [0.5, 0.5, 0.0];
        let q = [0.0, 0.0, 1.0];
        assert!((js_divergence(&p, &q) - 1.0).abs() < 1e-12);
        assert_eq!(js_divergence(&p, &p), 0.0);
    }

    #[test]
    fn tail_mass_counts_outer_bins() {
        let mut h = GradientHistogram {
            counts: vec![0; 20],
            lo: -1.0,
            hi: 1.0,
        };
        h.counts[0] = 1; // [-1, -0.9)
        h.counts[10] = 3; // [0, 0.1)
        h.counts[11] = 1; // [0.1, 0.2)
        assert!((h.tail_mass(0.1) - 0.4).abs() < 1e-12);
    }
}
