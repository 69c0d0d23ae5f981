//! Dominant streak-angle estimation by anisotropy-score search.
//!
//! For a candidate angle `θ` the image is scored by
//! `S(θ) = Σ|d_across| / (Σ|d_along| + ε)`, the derivatives taken across and
//! along the streak axis of the image rotated by `θ`. Upright streaks carry
//! almost all of their gradient energy across the streak, so `S` peaks at
//! the angle that makes them vertical.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UdgError};
use crate::exec::Exec;
use crate::image::{gaussian_gradient, ImageGrid};
use crate::rotate::canonical_angle;

pub const SCORE_EPS: f64 = 1e-6;
pub const LOW_CONFIDENCE: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AngleSearch {
    pub coarse_step_degrees: f64,
    pub refine_step_degrees: f64,
    /// Exclusive lower end of the search range.
    pub min_degrees: f64,
    /// Inclusive upper end of the search range.
    pub max_degrees: f64,
}

impl Default for AngleSearch {
    fn default() -> Self {
        Self {
            coarse_step_degrees: 2.0,
            refine_step_degrees: 0.25,
            min_degrees: -60.0,
            max_degrees: 60.0,
        }
    }
}

impl AngleSearch {
    pub fn validate(&self) -> Result<()> {
        if !(self.coarse_step_degrees > 0.0) {
            return Err(UdgError::param("coarse_step_degrees", "must be > 0"));
        }
        if !(self.refine_step_degrees > 0.0 && self.refine_step_degrees <= self.coarse_step_degrees) {
            return Err(UdgError::param(
                "refine_step_degrees",
                "must be in (0, coarse_step_degrees]",
            ));
        }
        if !(self.min_degrees < self.max_degrees && self.min_degrees >= -90.0 && self.max_degrees <= 90.0) {
            return Err(UdgError::param("max_degrees", "range must satisfy -90 <= min < max <= 90"));
        }
        Ok(())
    }

    /// Coarse grid, walking down from the inclusive upper end.
    pub fn candidates(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0usize;
        loop {
            let a = self.max_degrees - k as f64 * self.coarse_step_degrees;
            if a <= self.min_degrees + 1e-9 {
                break;
            }
            out.push(a);
            k += 1;
        }
        out.reverse();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleEstimate {
    pub angle_degrees: f64,
    /// Best score over the median coarse score; at least 1.
    pub confidence: f64,
}

impl AngleEstimate {
    pub fn is_low_confidence(&self) -> bool {
        self.confidence < LOW_CONFIDENCE
    }
}

/// Smoothing scale of the gradient estimate used for scoring.
pub const GRADIENT_SIGMA: f64 = 1.0;

/// Precomputed gradients for scoring candidate angles.
///
/// Rotating the image by `θ` turns its gradient `(g_col, g_row)` into
/// `d_across = cos θ·g_col − sin θ·g_row` and
/// `d_along = sin θ·g_col + cos θ·g_row`, so `S(θ)` is evaluated from one
/// gradient estimate without resampling the image per candidate. Only
/// pixels inside the inscribed disk contribute; the disk maps onto itself
/// under rotation about the centre, so every angle sees the same content.
#[derive(Debug, Clone)]
pub struct ScoreField {
    g_col: Vec<f64>,
    g_row: Vec<f64>,
}

impl ScoreField {
    pub fn new(img: &ImageGrid) -> Result<Self> {
        let (h, w) = img.dims();
        if h.min(w) < 32 {
            return Err(UdgError::InvalidInput(format!(
                "angle estimation needs at least 32x32, got {h}x{w}"
            )));
        }
        let (grad_row, grad_col) = gaussian_gradient(img, GRADIENT_SIGMA);
        let radius = (h.min(w) as f64 - 1.0) / 2.0 - 1.0;
        let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
        let mut g_col = Vec::new();
        let mut g_row = Vec::new();
        for i in 0..h {
            for j in 0..w {
                let (dy, dx) = (i as f64 - cy, j as f64 - cx);
                if dy * dy + dx * dx <= radius * radius {
                    g_col.push(grad_col.get(i, j));
                    g_row.push(grad_row.get(i, j));
                }
            }
        }
        Ok(Self { g_col, g_row })
    }

    pub fn score(&self, angle_degrees: f64) -> f64 {
        let (s, c) = angle_degrees.to_radians().sin_cos();
        let (mut across, mut along) = (0.0, 0.0);
        for (&gc, &gr) in self.g_col.iter().zip(&self.g_row) {
            across += (c * gc - s * gr).abs();
            along += (s * gc + c * gr).abs();
        }
        across / (along + SCORE_EPS)
    }
}

/// Anisotropy score `S(θ)` of an image.
pub fn anisotropy_score(img: &ImageGrid, angle_degrees: f64) -> Result<f64> {
    Ok(ScoreField::new(img)?.score(angle_degrees))
}

fn has_signal(img: &ImageGrid) -> bool {
    let (h, w) = img.dims();
    (0..h).any(|i| {
        (0..w).any(|j| {
            let p = img.get(i, j);
            (j + 1 < w && (img.get(i, j + 1) - p).abs() >= SCORE_EPS)
                || (i + 1 < h && (img.get(i + 1, j) - p).abs() >= SCORE_EPS)
        })
    })
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    while hi - lo > tol {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        }
    }
    if fa >= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

pub fn estimate_angle(img: &ImageGrid, search: &AngleSearch) -> Result<AngleEstimate> {
    estimate_angle_with(img, search, Exec::default())
}

/// [`estimate_angle`] with an explicit execution mode for the coarse sweep.
pub fn estimate_angle_with(img: &ImageGrid, search: &AngleSearch, exec: Exec) -> Result<AngleEstimate> {
    search.validate()?;
    let field = ScoreField::new(img)?;
    if !has_signal(img) {
        return Err(UdgError::NoSignal { eps: SCORE_EPS });
    }
    let candidates = search.candidates();
    let scores = exec.map(&candidates, |&a| field.score(a));
    let (best_idx, &best_score) = scores
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |acc, (k, s)| if *s > *acc.1 { (k, s) } else { acc });
    let center = candidates[best_idx];
    let (refined, refined_score) = golden_max(
        |a| field.score(a),
        (center - search.coarse_step_degrees).max(search.min_degrees),
        (center + search.coarse_step_degrees).min(search.max_degrees),
        search.refine_step_degrees,
    );
    let (angle, score) = if refined_score > best_score {
        (refined, refined_score)
    } else {
        (center, best_score)
    };
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if sorted.len() % 2 == 1 {
        sorted[sorted.len() / 2]
    } else {
        0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
    };
    let confidence = if median > 0.0 { (score / median).max(1.0) } else { 1.0 };
    Ok(AngleEstimate {
        angle_degrees: canonical_angle(angle),
        confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::clean_scene;
    use crate::synth::{synth_rain_layer, RainSpec};

    fn streaks(angle: f64, seed: u64) -> ImageGrid {
        let spec = RainSpec {
            angle_degrees: angle,
            seed,
            ..RainSpec::default()
        };
        synth_rain_layer(128, 128, &spec).unwrap().map(|v| 0.2 + v)
    }

    #[test]
    fn coarse_grid_shape() {
        let c = AngleSearch::default().candidates();
        assert_eq!(c.len(), 60);
        assert_eq!(c[0], -58.0);
        assert_eq!(*c.last().unwrap(), 60.0);
    }

    #[test]
    fn streaks_on_flat_background() {
        let est = estimate_angle(&streaks(20.0, 42), &AngleSearch::default()).unwrap();
        assert!((est.angle_degrees - 20.0).abs() <= 1.0, "{est:?}");
        assert!(!est.is_low_confidence());
    }

    #[test]
    fn vertical_streaks() {
        let search = AngleSearch::default();
        let est = estimate_angle(&streaks(0.0, 3), &search).unwrap();
        assert!(est.angle_degrees.abs() <= search.refine_step_degrees, "{est:?}");
    }

    #[test]
    fn flat_image_has_no_signal() {
        let img = ImageGrid::filled(64, 64, 0.5);
        assert!(matches!(
            estimate_angle(&img, &AngleSearch::default()),
            Err(UdgError::NoSignal { .. })
        ));
    }

    #[test]
    fn rain_free_scene_is_low_confidence() {
        for seed in 0..4 {
            let est = estimate_angle(&clean_scene(128, 128, seed), &AngleSearch::default()).unwrap();
            assert!(est.is_low_confidence(), "seed {seed}: {est:?}");
            assert!(est.confidence >= 1.0);
        }
    }

    #[test]
    fn too_small_rejected() {
        assert!(estimate_angle(&ImageGrid::zeros(16, 64), &AngleSearch::default()).is_err());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let img = streaks(-33.0, 9);
        let s = AngleSearch::default();
        assert_eq!(
            estimate_angle_with(&img, &s, Exec::Sequential).unwrap(),
            estimate_angle_with(&img, &s, Exec::Parallel).unwrap()
        );
    }
}
