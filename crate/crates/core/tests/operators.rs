mod common;

use common::*;
use proptest::prelude::*;
use udg::image::{grad_adjoint, grad_forward};
use udg::solver::Solver;
use udg::{Boundary, Direction, ImageGrid};

const DIRS: [Direction; 2] = [Direction::Along, Direction::Across];

#[test]
fn forward_difference_matches_dense_matrix() {
    let img = random_grid(8, 8, 11);
    for dir in DIRS {
        for (boundary, periodic) in [(Boundary::Periodic, true), (Boundary::Replicate, false)] {
            let dense = difference_matrix(8, 8, dir, periodic) * to_vector(&img);
            let fast = grad_forward(&img, dir, boundary).unwrap();
            assert_eq!(fast, from_vector(&dense, 8, 8), "{dir:?} {boundary:?}");
        }
    }
}

#[test]
fn adjoint_matches_dense_transpose() {
    let img = random_grid(6, 9, 12);
    for dir in DIRS {
        let dense = difference_matrix(6, 9, dir, true).transpose() * to_vector(&img);
        let fast = grad_adjoint(&img, dir).unwrap();
        assert!(rms(&fast, &from_vector(&dense, 6, 9)) < 1e-15);
    }
}

#[test]
fn ramp_example() {
    let ramp = ImageGrid::from_fn(4, 4, |_, j| j as f64);
    let d = grad_forward(&ramp, Direction::Across, Boundary::Periodic).unwrap();
    assert_eq!(d.get(1, 0), 1.0);
    assert_eq!(d.get(1, 3), -3.0);
    assert_eq!(grad_forward(&ramp, Direction::Along, Boundary::Periodic).unwrap().max_abs(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_identity(h in 2usize..=64, w in 2usize..=64, seed in any::<u64>()) {
        let x = random_grid(h, w, seed);
        let y = random_grid(h, w, seed.wrapping_add(1));
        for dir in DIRS {
            let lhs = grad_forward(&x, dir, Boundary::Periodic).unwrap().dot(&y);
            let rhs = x.dot(&grad_adjoint(&y, dir).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn gradient_is_linear(h in 2usize..=32, w in 2usize..=32, seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let x = random_grid(h, w, seed);
        let y = random_grid(h, w, seed.wrapping_add(7));
        let combo = x.scale(a).add(&y.scale(b));
        for dir in DIRS {
            for boundary in [Boundary::Periodic, Boundary::Replicate] {
                let lhs = grad_forward(&combo, dir, boundary).unwrap();
                let rhs = grad_forward(&x, dir, boundary).unwrap().scale(a)
                    .add(&grad_forward(&y, dir, boundary).unwrap().scale(b));
                prop_assert!(lhs.sub(&rhs).max_abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn fft_solve_matches_dense_circulant_solve() {
    for (n, seed) in [(8usize, 1u64), (16, 2), (32, 3)] {
        let rhs = random_grid(n, n, seed);
        let mut solver = Solver::new(&rhs).unwrap();
        for (a, b) in [(0.1, 0.1), (0.37, 2.5), (5.0, 0.01)] {
            let fast = solver.circulant_solve(&rhs, a, b, "test", 0).unwrap();
            let dense = dense_circulant_solve(&rhs, a, b);
            assert!(rms(&fast, &dense) <= 1e-8, "n={n} a={a} b={b}");
        }
    }
}

#[test]
fn fft_solve_on_rectangular_grid() {
    let rhs = random_grid(12, 20, 4);
    let mut solver = Solver::new(&rhs).unwrap();
    let fast = solver.circulant_solve(&rhs, 0.8, 0.3, "test", 0).unwrap();
    assert!(rms(&fast, &dense_circulant_solve(&rhs, 0.8, 0.3)) <= 1e-8);
}
