//! Nested ADMM for the directional-gradient decomposition.
//!
//! In the streak-upright frame the observation `Y_r` is split into a clean
//! layer `X` and a rain layer `R` by minimising
//!
//! ```text
//! E(X, R) = ½‖X + R − Y_r‖² + τ(‖d_along X‖₁ + ‖d_across X‖₁)
//!         + λ_along ‖d_along R‖₁ + λ_across ‖d_across Y_r − d_across R‖₁
//! ```
//!
//! The outer loop alternates a rain update and an image update. Each is an
//! ADMM with split variables for the L1 terms: a closed-form FFT solve for
//! the layer, soft shrinkage for the split variables, then multiplier
//! ascent and geometric penalty growth.

use serde::{Deserialize, Serialize};

use crate::angle::{estimate_angle, AngleSearch};
use crate::error::{Result, UdgError};
use crate::fft::{difference_spectrum, Fft2};
use crate::image::{grad_adjoint, grad_forward, Boundary, Direction, ImageGrid};
use crate::rotate::{RotatedFrame, RotationSpec};

/// Weights and schedules for the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UdgParams {
    /// Clean-layer TV weight.
    pub tau: f64,
    /// Rain sparsity along the streak.
    pub lambda_along: f64,
    /// Rain fidelity to the observation's across-streak gradients.
    pub lambda_across: f64,
    pub alpha0: f64,
    pub beta0: f64,
    /// Penalty growth per ADMM sweep.
    pub rho: f64,
    pub inner_iters: usize,
    pub outer_iters: usize,
    /// Relative energy change that ends the outer loop.
    pub tol: f64,
    /// Reject a block update that raises the energy.
    pub monotone: bool,
}

impl Default for UdgParams {
    fn default() -> Self {
        Self {
            tau: 0.01,
            lambda_along: 1.5,
            lambda_across: 1.0,
            alpha0: 0.1,
            beta0: 0.1,
            rho: 1.05,
            inner_iters: 10,
            outer_iters: 10,
            tol: 1e-4,
            monotone: true,
        }
    }
}

impl UdgParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, field: &'static str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(UdgError::param(field, format!("must be a finite value > 0, got {v}")))
            }
        };
        positive(self.tau, "tau")?;
        positive(self.lambda_along, "lambda_along")?;
        positive(self.lambda_across, "lambda_across")?;
        positive(self.alpha0, "alpha0")?;
        positive(self.beta0, "beta0")?;
        positive(self.tol, "tol")?;
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return Err(UdgError::param("rho", format!("must be > 1, got {}", self.rho)));
        }
        if self.inner_iters == 0 {
            return Err(UdgError::param("inner_iters", "must be >= 1"));
        }
        if self.outer_iters == 0 {
            return Err(UdgError::param("outer_iters", "must be >= 1"));
        }
        Ok(())
    }

    /// Same weights with `lambda_along = ratio * lambda_across`.
    pub fn with_ratio(mut self, ratio: f64) -> Self {
        self.lambda_along = ratio * self.lambda_across;
        self
    }
}

/// Soft shrinkage `sign(r) · max(|r| − ξ, 0)`; zero at `r = 0`.
#[inline]
pub fn shrink(r: f64, xi: f64) -> f64 {
    if r > xi {
        r - xi
    } else if r < -xi {
        r + xi
    } else {
        0.0
    }
}

fn shrink_grid(g: &ImageGrid, xi: f64) -> ImageGrid {
    g.map(|v| shrink(v, xi))
}

fn periodic(img: &ImageGrid, dir: Direction) -> ImageGrid {
    grad_forward(img, dir, Boundary::Periodic).expect("solver images are at least 2x2")
}

fn adjoint(img: &ImageGrid, dir: Direction) -> ImageGrid {
    grad_adjoint(img, dir).expect("solver images are at least 2x2")
}

/// The decomposition objective.
pub fn energy(x: &ImageGrid, r: &ImageGrid, y_r: &ImageGrid, params: &UdgParams) -> Result<f64> {
    x.same_dims(y_r)?;
    r.same_dims(y_r)?;
    check_solver_dims(y_r, 2)?;
    Ok(energy_terms(x, r, y_r, params).total())
}

/// The individual terms of [`energy`], unweighted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    pub fidelity: f64,
    pub clean_tv: f64,
    pub rain_along: f64,
    pub rain_across: f64,
    pub tau: f64,
    pub lambda_along: f64,
    pub lambda_across: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.fidelity
            + self.tau * self.clean_tv
            + self.lambda_along * self.rain_along
            + self.lambda_across * self.rain_across
    }
}

pub fn energy_terms(x: &ImageGrid, r: &ImageGrid, y_r: &ImageGrid, params: &UdgParams) -> EnergyTerms {
    let fidelity = 0.5
        * x.values()
            .iter()
            .zip(r.values())
            .zip(y_r.values())
            .map(|((a, b), c)| (a + b - c).powi(2))
            .sum::<f64>();
    let clean_tv = periodic(x, Direction::Along).l1_norm() + periodic(x, Direction::Across).l1_norm();
    let rain_along = periodic(r, Direction::Along).l1_norm();
    let rain_across = periodic(y_r, Direction::Across)
        .sub(&periodic(r, Direction::Across))
        .l1_norm();
    EnergyTerms {
        fidelity,
        clean_tv,
        rain_along,
        rain_across,
        tau: params.tau,
        lambda_along: params.lambda_along,
        lambda_across: params.lambda_across,
    }
}

fn check_solver_dims(img: &ImageGrid, min: usize) -> Result<()> {
    if img.height() < min || img.width() < min {
        return Err(UdgError::InvalidInput(format!(
            "solver needs at least {min}x{min}, got {}x{}",
            img.height(),
            img.width()
        )));
    }
    Ok(())
}

/// Penalty after `k` sweeps: `base · rho^k`, computed directly rather than
/// by repeated multiplication.
#[inline(never)]
pub fn penalty_at(base: f64, rho: f64, k: usize) -> f64 {
    base * rho.powi(k as i32)
}

/// Rain-update ADMM state.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub r: ImageGrid,
    pub p_along: ImageGrid,
    pub p_across: ImageGrid,
    pub j_along: ImageGrid,
    pub j_across: ImageGrid,
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
}

impl AdmmState {
    /// `R = 0` with zero split variables and multipliers.
    pub fn new(height: usize, width: usize, params: &UdgParams) -> Self {
        let z = ImageGrid::zeros(height, width);
        Self {
            r: z.clone(),
            p_along: z.clone(),
            p_across: z.clone(),
            j_along: z.clone(),
            j_across: z,
            alpha: params.alpha0,
            beta: params.beta0,
            k: 0,
        }
    }

    fn dims(&self) -> (usize, usize) {
        self.r.dims()
    }
}

/// Image-update ADMM state (split variables `Q = ∇X`, multipliers `K`).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageState {
    pub x: ImageGrid,
    pub q_along: ImageGrid,
    pub q_across: ImageGrid,
    pub k_along: ImageGrid,
    pub k_across: ImageGrid,
    pub gamma: f64,
    pub k: usize,
}

impl ImageState {
    pub fn new(x: ImageGrid, params: &UdgParams) -> Self {
        let (h, w) = x.dims();
        let z = ImageGrid::zeros(h, w);
        Self {
            q_along: periodic(&x, Direction::Along),
            q_across: periodic(&x, Direction::Across),
            k_along: z.clone(),
            k_across: z,
            x,
            gamma: params.alpha0,
            k: 0,
        }
    }
}

/// Per-image solver context: FFT plans, difference spectra and the fixed
/// across-gradient of the observation.
#[derive(Debug)]
pub struct Solver {
    y_r: ImageGrid,
    dy_across: ImageGrid,
    fft: Fft2,
    spec_along: Vec<f64>,
    spec_across: Vec<f64>,
}

/// Largest imaginary residue tolerated after an inverse FFT solve.
const IMAG_RESIDUE: f64 = 1e-9;

impl Solver {
    pub fn new(y_r: &ImageGrid) -> Result<Self> {
        check_solver_dims(y_r, 2)?;
        let (h, w) = y_r.dims();
        Ok(Self {
            dy_across: periodic(y_r, Direction::Across),
            y_r: y_r.clone(),
            fft: Fft2::new(h, w),
            spec_along: difference_spectrum(h, w, Direction::Along),
            spec_across: difference_spectrum(h, w, Direction::Across),
        })
    }

    pub fn observation(&self) -> &ImageGrid {
        &self.y_r
    }

    /// Solves `(I + a·D_alongᵀD_along + b·D_acrossᵀD_across) u = rhs`.
    pub fn circulant_solve(&mut self, rhs: &ImageGrid, a: f64, b: f64, stage: &'static str, iteration: usize) -> Result<ImageGrid> {
        let mut spec = self.fft.forward(rhs);
        for ((c, sa), sc) in spec.iter_mut().zip(&self.spec_along).zip(&self.spec_across) {
            *c /= 1.0 + a * sa + b * sc;
        }
        let (out, imag) = self.fft.inverse_real(spec);
        if !(imag < IMAG_RESIDUE) || !out.is_finite() {
            return Err(UdgError::NumericFailure { stage, iteration });
        }
        Ok(out)
    }

    /// One rain-update sweep: FFT solve for `R`, shrinkage of both split
    /// variables, multiplier ascent, penalty growth.
    pub fn rain_sweep(&mut self, x: &ImageGrid, state: &mut AdmmState, params: &UdgParams) -> Result<()> {
        if x.dims() != self.y_r.dims() || state.dims() != self.y_r.dims() {
            return Err(UdgError::InvalidInput("rain state does not match observation".into()));
        }
        let (alpha, beta) = (state.alpha, state.beta);
        let along_target = state.p_along.scale(alpha).sub(&state.j_along);
        let across_target = state
            .p_across
            .add(&self.dy_across)
            .scale(beta)
            .sub(&state.j_across);
        let rhs = self
            .y_r
            .sub(x)
            .add(&adjoint(&along_target, Direction::Along))
            .add(&adjoint(&across_target, Direction::Across));
        let r = self.circulant_solve(&rhs, alpha, beta, "rain update", state.k)?;

        let dr_along = periodic(&r, Direction::Along);
        let dr_across_res = periodic(&r, Direction::Across).sub(&self.dy_across);
        let p_along = shrink_grid(
            &dr_along.add(&state.j_along.scale(1.0 / alpha)),
            params.lambda_along / alpha,
        );
        let p_across = shrink_grid(
            &dr_across_res.add(&state.j_across.scale(1.0 / beta)),
            params.lambda_across / beta,
        );
        state.j_along = state.j_along.add(&dr_along.sub(&p_along).scale(alpha));
        state.j_across = state.j_across.add(&dr_across_res.sub(&p_across).scale(beta));
        if !state.j_along.is_finite() || !state.j_across.is_finite() {
            return Err(UdgError::NumericFailure {
                stage: "rain multipliers",
                iteration: state.k,
            });
        }
        state.r = r;
        state.p_along = p_along;
        state.p_across = p_across;
        state.k += 1;
        state.alpha = penalty_at(params.alpha0, params.rho, state.k);
        state.beta = penalty_at(params.beta0, params.rho, state.k);
        Ok(())
    }

    /// One image-update sweep for `min ½‖X + R − Y_r‖² + τ‖∇X‖₁`.
    pub fn image_sweep(&mut self, r: &ImageGrid, state: &mut ImageState, params: &UdgParams) -> Result<()> {
        if r.dims() != self.y_r.dims() || state.x.dims() != self.y_r.dims() {
            return Err(UdgError::InvalidInput("image state does not match observation".into()));
        }
        let gamma = state.gamma;
        let along_target = state.q_along.scale(gamma).sub(&state.k_along);
        let across_target = state.q_across.scale(gamma).sub(&state.k_across);
        let rhs = self
            .y_r
            .sub(r)
            .add(&adjoint(&along_target, Direction::Along))
            .add(&adjoint(&across_target, Direction::Across));
        let x = self.circulant_solve(&rhs, gamma, gamma, "image update", state.k)?;

        let dx_along = periodic(&x, Direction::Along);
        let dx_across = periodic(&x, Direction::Across);
        let threshold = params.tau / gamma;
        let q_along = shrink_grid(&dx_along.add(&state.k_along.scale(1.0 / gamma)), threshold);
        let q_across = shrink_grid(&dx_across.add(&state.k_across.scale(1.0 / gamma)), threshold);
        state.k_along = state.k_along.add(&dx_along.sub(&q_along).scale(gamma));
        state.k_across = state.k_across.add(&dx_across.sub(&q_across).scale(gamma));
        if !state.k_along.is_finite() || !state.k_across.is_finite() {
            return Err(UdgError::NumericFailure {
                stage: "image multipliers",
                iteration: state.k,
            });
        }
        state.x = x;
        state.q_along = q_along;
        state.q_across = q_across;
        state.k += 1;
        state.gamma = penalty_at(params.alpha0, params.rho, state.k);
        Ok(())
    }
}

/// One rain-update sweep against a fresh solver context.
pub fn update_r(x: &ImageGrid, y_r: &ImageGrid, state: &AdmmState, params: &UdgParams) -> Result<AdmmState> {
    x.same_dims(y_r)?;
    let mut solver = Solver::new(y_r)?;
    let mut next = state.clone();
    solver.rain_sweep(x, &mut next, params)?;
    Ok(next)
}

/// Image update from `X = Y_r − R` with `inner_iters` sweeps.
pub fn update_x(r: &ImageGrid, y_r: &ImageGrid, params: &UdgParams) -> Result<ImageGrid> {
    params.validate()?;
    r.same_dims(y_r)?;
    let mut solver = Solver::new(y_r)?;
    let mut state = ImageState::new(y_r.sub(r), params);
    for _ in 0..params.inner_iters {
        solver.image_sweep(r, &mut state, params)?;
    }
    Ok(state.x)
}

/// Output of the upright-frame alternation.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub x: ImageGrid,
    pub r: ImageGrid,
    /// Energy at the initial point followed by one value per outer iteration.
    pub objective_trace: Vec<f64>,
    pub iters_used: usize,
    pub converged: bool,
}

/// Alternating minimisation in the upright frame, starting at `X = Y_r`,
/// `R = 0`. The rain ADMM state (multipliers and penalties) carries over
/// between outer iterations; each image update restarts from `X = Y_r − R`
/// as in [`update_x`].
pub fn decompose(y_r: &ImageGrid, params: &UdgParams) -> Result<Decomposition> {
    params.validate()?;
    check_solver_dims(y_r, 8)?;
    let (h, w) = y_r.dims();
    let mut solver = Solver::new(y_r)?;
    let mut x = y_r.clone();
    let mut r = ImageGrid::zeros(h, w);
    let mut rain = AdmmState::new(h, w, params);
    let mut current = energy_terms(&x, &r, y_r, params).total();
    let mut trace = vec![current];
    let mut converged = false;
    let mut iters_used = 0;

    for outer in 0..params.outer_iters {
        for _ in 0..params.inner_iters {
            solver.rain_sweep(&x, &mut rain, params)?;
        }
        let e = energy_terms(&x, &rain.r, y_r, params).total();
        if !e.is_finite() {
            return Err(UdgError::NumericFailure {
                stage: "energy",
                iteration: outer,
            });
        }
        if !params.monotone || e <= current {
            r = rain.r.clone();
            current = e;
        }

        let mut image = ImageState::new(y_r.sub(&r), params);
        for _ in 0..params.inner_iters {
            solver.image_sweep(&r, &mut image, params)?;
        }
        let e = energy_terms(&image.x, &r, y_r, params).total();
        if !e.is_finite() {
            return Err(UdgError::NumericFailure {
                stage: "energy",
                iteration: outer,
            });
        }
        if !params.monotone || e <= current {
            x = image.x.clone();
            current = e;
        }

        let previous = *trace.last().expect("trace starts non-empty");
        trace.push(current);
        iters_used = outer + 1;
        let change = (previous - current).abs() / previous.abs().max(f64::MIN_POSITIVE);
        if previous == current || change < params.tol {
            converged = true;
            break;
        }
    }

    Ok(Decomposition {
        x,
        r,
        objective_trace: trace,
        iters_used,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleSource {
    User,
    Estimated,
    /// Estimation found no directional signal; the solver ran at 0°.
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleUsed {
    pub angle_degrees: f64,
    pub confidence: Option<f64>,
    pub source: AngleSource,
}

impl AngleUsed {
    pub fn user(angle_degrees: f64) -> Self {
        Self {
            angle_degrees,
            confidence: None,
            source: AngleSource::User,
        }
    }

    /// Resolves the angle for `y`: the supplied value, the estimate, or 0°
    /// when the image has no directional signal.
    pub fn resolve(y: &ImageGrid, angle: Option<f64>, search: &AngleSearch) -> Result<Self> {
        if let Some(a) = angle {
            if !a.is_finite() || a.abs() > 90.0 {
                return Err(UdgError::param("angle", format!("must be in [-90, 90], got {a}")));
            }
            return Ok(Self::user(a));
        }
        match estimate_angle(y, search) {
            Ok(est) => Ok(Self {
                angle_degrees: est.angle_degrees,
                confidence: Some(est.confidence),
                source: AngleSource::Estimated,
            }),
            Err(UdgError::NoSignal { .. }) => Ok(Self {
                angle_degrees: 0.0,
                confidence: None,
                source: AngleSource::Fallback,
            }),
            Err(e) => Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionResult {
    /// Clean layer in the input frame.
    pub x: ImageGrid,
    /// Rain layer in the input frame.
    pub r: ImageGrid,
    /// Clean layer in the upright (padded) frame.
    pub x_rotated: ImageGrid,
    pub r_rotated: ImageGrid,
    /// The upright observation the solver saw.
    pub y_rotated: ImageGrid,
    pub angle: AngleUsed,
    pub objective_trace: Vec<f64>,
    pub iters_used: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl DecompositionResult {
    pub fn final_energy(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

/// Full pipeline: resolve the angle, rotate into a padded upright frame,
/// decompose, and map both layers back.
///
/// The input-frame clean layer is `Y − unrotate(Y_r − X_r)`: only the
/// removed component passes through the inverse resampling, so the
/// background keeps its original sharpness.
pub fn derain(y: &ImageGrid, params: &UdgParams, angle: Option<f64>) -> Result<DecompositionResult> {
    derain_with_search(y, params, angle, &AngleSearch::default())
}

pub fn derain_with_search(
    y: &ImageGrid,
    params: &UdgParams,
    angle: Option<f64>,
    search: &AngleSearch,
) -> Result<DecompositionResult> {
    params.validate()?;
    check_solver_dims(y, 32)?;
    let used = AngleUsed::resolve(y, angle, search)?;
    derain_at(y, params, used)
}

/// [`derain`] with an already-resolved angle.
pub fn derain_at(y: &ImageGrid, params: &UdgParams, used: AngleUsed) -> Result<DecompositionResult> {
    params.validate()?;
    check_solver_dims(y, 8)?;
    let mut warnings = Vec::new();
    match used.source {
        AngleSource::Fallback => warnings.push("no directional signal; solved at 0 degrees".to_string()),
        AngleSource::Estimated if used.confidence.is_some_and(|c| c < crate::angle::LOW_CONFIDENCE) => {
            warnings.push(format!(
                "low-confidence angle estimate ({:.2})",
                used.confidence.unwrap_or(1.0)
            ))
        }
        _ => {}
    }
    let frame = RotatedFrame::new(y.height(), y.width(), RotationSpec::new(used.angle_degrees));
    let y_r = frame.enter(y)?;
    let d = decompose(&y_r, params)?;
    let (x, r) = if used.angle_degrees == 0.0 {
        (d.x.clone(), d.r.clone())
    } else {
        let removed = frame.leave(&y_r.sub(&d.x))?;
        (y.sub(&removed), frame.leave(&d.r)?)
    };
    Ok(DecompositionResult {
        x,
        r,
        x_rotated: d.x,
        r_rotated: d.r,
        y_rotated: y_r,
        angle: used,
        objective_trace: d.objective_trace,
        iters_used: d.iters_used,
        converged: d.converged,
        warnings,
    })
}
