//! Procedural rain-free test scenes.
//!
//! Scenes are built from orientation-free ingredients (smooth multi-octave
//! waves with random headings, soft-edged blobs and polygons at random
//! rotations, blurred grain) so their horizontal and vertical gradient
//! statistics match, like natural photographs.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{gaussian_blur, ImageGrid};

fn smoothstep_edge(signed_dist: f64, softness: f64) -> f64 {
    0.5 * (1.0 - (signed_dist / softness).tanh())
}

/// A deterministic rain-free scene with values in roughly `[0.05, 0.7]`.
pub fn clean_scene(height: usize, width: usize, seed: u64) -> ImageGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c1ea_0000_0000);
    let scale = height.max(width) as f64;

    // Low-frequency shading.
    let waves: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|k| {
            let heading = rng.random::<f64>() * 2.0 * PI;
            let freq = (1.0 + k as f64) * (0.6 + 0.8 * rng.random::<f64>()) * 2.0 * PI / scale;
            let phase = rng.random::<f64>() * 2.0 * PI;
            let amp = 0.06 / (1.0 + k as f64);
            (heading, freq, phase, amp)
        })
        .collect();
    let mut img = ImageGrid::from_fn(height, width, |i, j| {
        0.35 + waves
            .iter()
            .map(|&(hd, f, ph, a)| a * (f * (j as f64 * hd.cos() + i as f64 * hd.sin()) + ph).sin())
            .sum::<f64>()
    });

    // Soft-edged ellipses and rotated boxes of modest aspect ratio.
    let n_shapes = 10 + (scale as usize / 16);
    for _ in 0..n_shapes {
        let cy = rng.random::<f64>() * height as f64;
        let cx = rng.random::<f64>() * width as f64;
        let r = scale * (0.04 + 0.12 * rng.random::<f64>());
        let aspect = 1.0 + 0.6 * rng.random::<f64>();
        let heading = rng.random::<f64>() * PI;
        let (sh, ch) = heading.sin_cos();
        let contrast = (rng.random::<f64>() - 0.5) * 0.3;
        let boxy = rng.random::<f64>() < 0.4;
        let softness = 0.6 + 1.2 * rng.random::<f64>();
        let reach = r * aspect + 4.0 * softness;
        let i0 = (cy - reach).floor().max(0.0) as usize;
        let i1 = ((cy + reach).ceil() as usize).min(height - 1);
        let j0 = (cx - reach).floor().max(0.0) as usize;
        let j1 = ((cx + reach).ceil() as usize).min(width - 1);
        for i in i0..=i1 {
            for j in j0..=j1 {
                let dy = i as f64 - cy;
                let dx = j as f64 - cx;
                let u = (dx * ch + dy * sh) / aspect;
                let v = -dx * sh + dy * ch;
                let dist = if boxy {
                    u.abs().max(v.abs()) - r
                } else {
                    (u * u + v * v).sqrt() - r
                };
                img[(i, j)] += contrast * smoothstep_edge(dist, softness);
            }
        }
    }

    // Fine isotropic grain.
    let noise = ImageGrid::from_fn(height, width, |_, _| rng.random::<f64>() - 0.5);
    let grain = gaussian_blur(&noise, 1.2);
    let img = img.add(&grain.scale(0.08));
    img.map(|v| v.clamp(0.05, 0.7))
}

/// `count` scenes with consecutive seeds starting at `seed`.
pub fn clean_corpus(count: usize, height: usize, width: usize, seed: u64) -> Vec<ImageGrid> {
    (0..count)
        .map(|k| clean_scene(height, width, seed.wrapping_add(k as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::anisotropy_ratio;

    #[test]
    fn scenes_are_deterministic_and_distinct() {
        assert_eq!(clean_scene(32, 40, 7), clean_scene(32, 40, 7));
        assert_ne!(clean_scene(32, 40, 7), clean_scene(32, 40, 8));
    }

    #[test]
    fn scenes_are_roughly_isotropic() {
        for img in clean_corpus(8, 128, 128, 100) {
            let r = anisotropy_ratio(&img).unwrap();
            assert!((0.7..=1.4).contains(&r), "ratio {r}");
        }
    }
}
