//! Calibration run over the standard synthetic tile set: prints per-tile
//! PSNR gain and solver diagnostics for parameters given as `key=value`.
//!
//! cargo run --release --example calibrate -- tiles=50 tau=0.01 lx=1.5 ly=1.0
//!
//! `offset=D` perturbs the true angle by D degrees; `estimate=1` uses the
//! angle estimator instead of the true angle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use udg::corpus::clean_scene;
use udg::metrics::psnr;
use udg::synth::{make_pair, BlendMode, RainSpec};
use udg::{derain, Exec, UdgParams};

fn main() {
    let mut params = UdgParams::default();
    let mut tiles = 10usize;
    let mut offset = 0.0f64;
    let mut estimate = false;
    let mut density = RainSpec::default().density;
    let mut intensity = RainSpec::default().intensity;
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').expect("arguments are key=value");
        let f: f64 = v.parse().expect("values are numbers");
        match k {
            "tiles" => tiles = f as usize,
            "tau" => params.tau = f,
            "lx" => params.lambda_along = f,
            "ly" => params.lambda_across = f,
            "alpha0" => {
                params.alpha0 = f;
                params.beta0 = f
            }
            "rho" => params.rho = f,
            "inner" => params.inner_iters = f as usize,
            "outer" => params.outer_iters = f as usize,
            "tol" => params.tol = f,
            "monotone" => params.monotone = f != 0.0,
            "offset" => offset = f,
            "estimate" => estimate = f != 0.0,
            "density" => density = f,
            "intensity" => intensity = f,
            _ => panic!("unknown key {k}"),
        }
    }
    println!("{params:?}");
    let rows = Exec::Parallel.map_range(tiles, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + t as u64);
        let angle: f64 = rng.random_range(-45.0..45.0);
        let clean = clean_scene(128, 128, 5000 + t as u64);
        let spec = RainSpec {
            angle_degrees: angle,
            seed: 9000 + t as u64,
            density,
            intensity,
            ..RainSpec::default()
        };
        let pair = make_pair(&clean, &spec, BlendMode::Additive).unwrap();
        let used = if estimate { None } else { Some(angle + offset) };
        let out = derain(&pair.rainy, &params, used).unwrap();
        let before = psnr(&pair.rainy, &clean, 1.0).unwrap();
        let after = psnr(&out.x, &clean, 1.0).unwrap();
        let resid = out.x_rotated.add(&out.r_rotated).sub(&out.y_rotated).max_abs();
        let trace = &out.objective_trace;
        let mono = trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6));
        (angle, out.angle.angle_degrees, before, after, resid, out.iters_used, mono)
    });
    let mut gain = 0.0;
    let mut worst = f64::INFINITY;
    for (a, used, before, after, resid, iters, mono) in &rows {
        println!(
            "angle {a:6.1} used {used:6.1} psnr {before:6.2} -> {after:6.2} ({:+5.2}) resid {resid:.3} iters {iters} monotone {mono}",
            after - before
        );
        gain += after - before;
        worst = worst.min(after - before);
    }
    println!("mean gain {:.3} dB, worst {:.3} dB", gain / rows.len() as f64, worst);
}
