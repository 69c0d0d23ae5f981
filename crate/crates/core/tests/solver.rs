mod common;

use common::*;
use proptest::prelude::*;
use udg::image::grad_adjoint;
use udg::solver::{decompose, energy_terms, update_r, update_x, AdmmState};
use udg::{energy, shrink, Direction, ImageGrid, UdgParams};

fn adjoint(img: &ImageGrid, dir: Direction) -> ImageGrid {
    grad_adjoint(img, dir).unwrap()
}

/// One rain sweep rebuilt from dense matrices and scalar shrinkage.
fn dense_rain_sweep(x: &ImageGrid, y: &ImageGrid, s: &AdmmState, p: &UdgParams) -> AdmmState {
    let (a, b) = (s.alpha, s.beta);
    let dy = naive_diff(y, Direction::Across);
    let rhs = y
        .sub(x)
        .add(&adjoint(&s.p_along.scale(a).sub(&s.j_along), Direction::Along))
        .add(&adjoint(&s.p_across.add(&dy).scale(b).sub(&s.j_across), Direction::Across));
    let r = dense_circulant_solve(&rhs, a, b);
    let dra = naive_diff(&r, Direction::Along);
    let drc = naive_diff(&r, Direction::Across).sub(&dy);
    let pa = dra.zip_map(&s.j_along, |d, j| shrink(d + j / a, p.lambda_along / a));
    let pc = drc.zip_map(&s.j_across, |d, j| shrink(d + j / b, p.lambda_across / b));
    AdmmState {
        j_along: s.j_along.add(&dra.sub(&pa).scale(a)),
        j_across: s.j_across.add(&drc.sub(&pc).scale(b)),
        r,
        p_along: pa,
        p_across: pc,
        alpha: a * p.rho,
        beta: b * p.rho,
        k: s.k + 1,
    }
}

#[test]
fn rain_update_matches_dense_oracle() {
    let p = UdgParams::default();
    let y = random_grid(8, 8, 1);
    let x = random_grid(8, 8, 2).scale(0.5);
    let mut fast = AdmmState::new(8, 8, &p);
    let mut slow = fast.clone();
    for step in 0..4 {
        let next_fast = update_r(&x, &y, &fast, &p).unwrap();
        let next_slow = dense_rain_sweep(&x, &y, &slow, &p);
        assert!(rms(&next_fast.r, &next_slow.r) <= 1e-10, "step {step}");
        assert!(rms(&next_fast.p_across, &next_slow.p_across) <= 1e-10);
        assert!(rms(&next_fast.j_along, &next_slow.j_along) <= 1e-10);
        assert!((next_fast.alpha - next_slow.alpha).abs() <= 1e-12);
        fast = next_fast;
        slow = next_slow;
    }
}

/// `argmin ½‖X − B‖² + τ(‖D_a X‖₁ + ‖D_c X‖₁)` by FISTA on the box-constrained
/// dual `min_{|p| ≤ τ} ½‖B − Dᵀp‖²`.
fn tv_prox_oracle(b: &ImageGrid, tau: f64, iters: usize) -> ImageGrid {
    let (h, w) = b.dims();
    let step = 1.0 / 8.0;
    let project = |g: ImageGrid| g.map(|v| v.clamp(-tau, tau));
    let primal = |pa: &ImageGrid, pc: &ImageGrid| b.sub(&adjoint(pa, Direction::Along)).sub(&adjoint(pc, Direction::Across));
    let (mut pa, mut pc) = (ImageGrid::zeros(h, w), ImageGrid::zeros(h, w));
    let (mut qa, mut qc) = (pa.clone(), pc.clone());
    let mut t = 1.0f64;
    for _ in 0..iters {
        let x = primal(&qa, &qc);
        let na = project(qa.add(&naive_diff(&x, Direction::Along).scale(step)));
        let nc = project(qc.add(&naive_diff(&x, Direction::Across).scale(step)));
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let m = (t - 1.0) / t_next;
        qa = na.add(&na.sub(&pa).scale(m));
        qc = nc.add(&nc.sub(&pc).scale(m));
        pa = na;
        pc = nc;
        t = t_next;
    }
    primal(&pa, &pc)
}

#[test]
fn image_update_matches_dual_tv_oracle() {
    let y = random_grid(8, 8, 3);
    let r = random_grid(8, 8, 4).scale(0.2);
    let p = UdgParams {
        tau: 0.05,
        alpha0: 1.0,
        rho: 1.0001,
        inner_iters: 3000,
        ..UdgParams::default()
    };
    let fast = update_x(&r, &y, &p).unwrap();
    let oracle = tv_prox_oracle(&y.sub(&r), p.tau, 20000);
    let err = rms(&fast, &oracle);
    assert!(err <= 1e-4, "rms {err}");
}

#[test]
fn energy_matches_term_by_term_oracle() {
    let p = UdgParams {
        tau: 0.03,
        lambda_along: 2.0,
        lambda_across: 0.7,
        ..UdgParams::default()
    };
    for seed in 0..5 {
        let (h, w) = (7 + seed as usize, 9);
        let x = random_grid(h, w, seed);
        let r = random_grid(h, w, seed + 10);
        let y = random_grid(h, w, seed + 20);
        let fast = energy(&x, &r, &y, &p).unwrap();
        let slow = naive_energy(&x, &r, &y, p.tau, p.lambda_along, p.lambda_across);
        assert!((fast - slow).abs() <= 1e-10 * slow.abs(), "{fast} vs {slow}");
        assert!((energy_terms(&x, &r, &y, &p).total() - fast).abs() <= 1e-12 * fast.abs());
    }
}

#[test]
fn shrinkage_identities_on_dense_grid() {
    for a in 0..100 {
        let r = -2.0 + 4.0 * a as f64 / 99.0;
        for b in 0..100 {
            let xi = 2.0 * b as f64 / 99.0;
            let out = shrink(r, xi);
            assert!((out.abs() - (r.abs() - xi).max(0.0)).abs() <= 1e-15, "r={r} xi={xi}");
            if r.abs() <= xi {
                assert_eq!(out, 0.0);
            } else {
                assert_eq!(out.signum(), r.signum());
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn shrink_is_the_l1_prox(r in -5.0f64..5.0, xi in 0.0f64..3.0, probe in -5.0f64..5.0) {
        let out = shrink(r, xi);
        let obj = |z: f64| 0.5 * (z - r) * (z - r) + xi * z.abs();
        prop_assert!(obj(out) <= obj(probe) + 1e-12);
        prop_assert!((out.abs() - (r.abs() - xi).max(0.0)).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn outer_energy_never_increases(seed in any::<u64>(), n in 8usize..24) {
        let y = random_grid(n, n, seed);
        let d = decompose(&y, &UdgParams::default()).unwrap();
        for w in d.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-6), "{:?}", d.objective_trace);
        }
    }
}
