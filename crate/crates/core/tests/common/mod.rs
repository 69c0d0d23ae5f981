//! Slow, obviously-correct reference implementations shared by the
//! integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use udg::corpus::clean_scene;
use udg::{BlendMode, Direction, ImageGrid, RainSpec};

pub fn random_grid(h: usize, w: usize, seed: u64) -> ImageGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageGrid::from_fn(h, w, |_, _| rng.random::<f64>())
}

pub fn to_vector(img: &ImageGrid) -> DVector<f64> {
    DVector::from_column_slice(img.values())
}

pub fn from_vector(v: &DVector<f64>, h: usize, w: usize) -> ImageGrid {
    ImageGrid::new(h, w, v.iter().copied().collect()).unwrap()
}

/// Dense forward-difference matrix on a row-major `h x w` grid.
pub fn difference_matrix(h: usize, w: usize, dir: Direction, periodic: bool) -> DMatrix<f64> {
    let n = h * w;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..h {
        for j in 0..w {
            let p = i * w + j;
            let next = match dir {
                Direction::Along if i + 1 < h => Some((i + 1) * w + j),
                Direction::Along if periodic => Some(j),
                Direction::Across if j + 1 < w => Some(i * w + j + 1),
                Direction::Across if periodic => Some(i * w),
                _ => None,
            };
            if let Some(q) = next {
                m[(p, p)] -= 1.0;
                m[(p, q)] += 1.0;
            }
        }
    }
    m
}

/// Solves `(I + a·DaᵀDa + b·DcᵀDc) u = rhs` by dense LU.
pub fn dense_circulant_solve(rhs: &ImageGrid, a: f64, b: f64) -> ImageGrid {
    let (h, w) = rhs.dims();
    let da = difference_matrix(h, w, Direction::Along, true);
    let dc = difference_matrix(h, w, Direction::Across, true);
    let n = h * w;
    let lhs = DMatrix::identity(n, n) + da.transpose() * &da * a + dc.transpose() * &dc * b;
    let u = lhs.lu().solve(&to_vector(rhs)).expect("system is positive definite");
    from_vector(&u, h, w)
}

pub fn rms(a: &ImageGrid, b: &ImageGrid) -> f64 {
    (a.sub(b).sq_norm() / a.len() as f64).sqrt()
}

/// Periodic finite difference computed pixel by pixel.
pub fn naive_diff(img: &ImageGrid, dir: Direction) -> ImageGrid {
    let (h, w) = img.dims();
    ImageGrid::from_fn(h, w, |i, j| match dir {
        Direction::Along => img.get((i + 1) % h, j) - img.get(i, j),
        Direction::Across => img.get(i, (j + 1) % w) - img.get(i, j),
    })
}

/// Decomposition objective written out term by term.
pub fn naive_energy(x: &ImageGrid, r: &ImageGrid, y: &ImageGrid, tau: f64, lx: f64, ly: f64) -> f64 {
    let (h, w) = y.dims();
    let mut e = 0.0;
    for i in 0..h {
        for j in 0..w {
            let d = x.get(i, j) + r.get(i, j) - y.get(i, j);
            e += 0.5 * d * d;
        }
    }
    let l1 = |g: ImageGrid| g.values().iter().map(|v| v.abs()).sum::<f64>();
    e += tau * (l1(naive_diff(x, Direction::Along)) + l1(naive_diff(x, Direction::Across)));
    e += lx * l1(naive_diff(r, Direction::Along));
    e += ly * l1(naive_diff(y, Direction::Across).sub(&naive_diff(r, Direction::Across)));
    e
}

/// Rain streaks on a constant background.
pub fn streak_image(angle: f64, intensity: f64, seed: u64, size: usize) -> ImageGrid {
    let spec = RainSpec {
        angle_degrees: angle,
        intensity,
        seed,
        ..RainSpec::default()
    };
    udg::synth_rain_layer(size, size, &spec).unwrap().map(|v| 0.2 + v)
}

/// The standard synthetic tile set: 128x128 procedural scenes, additive
/// rain at angles uniform in ±45°.
pub fn tile_set(count: usize) -> Vec<udg::RainPair> {
    (0..count)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + t as u64);
            let spec = RainSpec {
                angle_degrees: rng.random_range(-45.0..45.0),
                seed: 9000 + t as u64,
                ..RainSpec::default()
            };
            udg::make_pair(&clean_scene(128, 128, 5000 + t as u64), &spec, BlendMode::Additive).unwrap()
        })
        .collect()
}
