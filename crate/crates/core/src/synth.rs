//! Synthetic rain layers and rainy composites with known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Result, UdgError};
use crate::image::ImageGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlendMode {
    /// `1 - (1 - clean)(1 - rain)`.
    #[default]
    Screen,
    /// `clean + rain`, unclamped, so the layer model holds exactly.
    Additive,
}

/// Streak statistics. `angle_degrees` is the slant from vertical; rotating
/// the layer by the same angle makes the streaks upright.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RainSpec {
    pub angle_degrees: f64,
    /// Expected streak count per 1000 pixels.
    pub density: f64,
    pub length_px: f64,
    pub length_jitter: f64,
    pub width_px: f64,
    pub intensity: f64,
    pub intensity_jitter: f64,
    pub seed: u64,
}

impl Default for RainSpec {
    fn default() -> Self {
        Self {
            angle_degrees: 0.0,
            density: 2.0,
            length_px: 20.0,
            length_jitter: 0.3,
            width_px: 1.5,
            intensity: 0.5,
            intensity_jitter: 0.3,
            seed: 0,
        }
    }
}

impl RainSpec {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &'static str, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(UdgError::param(field, reason))
            }
        };
        check(self.angle_degrees.is_finite(), "angle_degrees", "must be finite")?;
        check(self.density > 0.0 && self.density.is_finite(), "density", "must be > 0")?;
        check(self.length_px >= 2.0 && self.length_px.is_finite(), "length_px", "must be >= 2")?;
        check((0.0..1.0).contains(&self.length_jitter), "length_jitter", "must be in [0, 1)")?;
        check(self.width_px >= 1.0 && self.width_px.is_finite(), "width_px", "must be >= 1")?;
        check(self.intensity > 0.0 && self.intensity <= 1.0, "intensity", "must be in (0, 1]")?;
        check(
            (0.0..1.0).contains(&self.intensity_jitter),
            "intensity_jitter",
            "must be in [0, 1)",
        )?;
        Ok(())
    }

    pub fn expected_streaks(&self, height: usize, width: usize) -> f64 {
        self.density * (height * width) as f64 / 1000.0
    }
}

/// One sampled streak segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Streak {
    pub center_row: f64,
    pub center_col: f64,
    pub length: f64,
    pub intensity: f64,
}

/// Draws the streak population for a layer (Poisson count, uniform centres).
pub fn sample_streaks(height: usize, width: usize, spec: &RainSpec) -> Result<Vec<Streak>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mean = spec.expected_streaks(height, width);
    let count = Poisson::new(mean)
        .map_err(|e| UdgError::param("density", e.to_string()))?
        .sample(&mut rng) as usize;
    let jitter = |rng: &mut ChaCha8Rng, amount: f64| 1.0 + amount * rng.random_range(-1.0..=1.0);
    Ok((0..count)
        .map(|_| {
            let center_row = rng.random::<f64>() * height as f64;
            let center_col = rng.random::<f64>() * width as f64;
            let length = (spec.length_px * jitter(&mut rng, spec.length_jitter)).max(2.0);
            let intensity = (spec.intensity * jitter(&mut rng, spec.intensity_jitter)).clamp(1e-3, 1.0);
            Streak {
                center_row,
                center_col,
                length,
                intensity,
            }
        })
        .collect())
}

/// Renders streaks as anti-aliased segments with a Gaussian cross profile
/// (`sigma = width / 2`) and one-pixel soft ends, summed then clamped.
pub fn render_streaks(height: usize, width: usize, streaks: &[Streak], spec: &RainSpec) -> ImageGrid {
    let (s, c) = spec.angle_degrees.to_radians().sin_cos();
    // Unit streak direction in (row, col).
    let (dr, dc) = (c, s);
    let sigma = spec.width_px / 2.0;
    let reach = 3.0 * sigma + 1.0;
    let mut layer = ImageGrid::zeros(height, width);
    for st in streaks {
        let half = st.length / 2.0;
        let ext_r = half * dr.abs() + reach;
        let ext_c = half * dc.abs() + reach;
        let r0 = (st.center_row - ext_r).floor().max(0.0) as usize;
        let r1 = ((st.center_row + ext_r).ceil() as usize).min(height - 1);
        let c0 = (st.center_col - ext_c).floor().max(0.0) as usize;
        let c1 = ((st.center_col + ext_c).ceil() as usize).min(width - 1);
        if st.center_row + ext_r < 0.0 || st.center_col + ext_c < 0.0 || r0 > r1 || c0 > c1 {
            continue;
        }
        for i in r0..=r1 {
            for j in c0..=c1 {
                let pr = i as f64 - st.center_row;
                let pc = j as f64 - st.center_col;
                let t = pr * dr + pc * dc;
                let end = (half + 0.5 - t.abs()).clamp(0.0, 1.0);
                if end == 0.0 {
                    continue;
                }
                let perp = pr * dc - pc * dr;
                if perp.abs() > reach {
                    continue;
                }
                layer[(i, j)] += st.intensity * end * (-perp * perp / (2.0 * sigma * sigma)).exp();
            }
        }
    }
    layer.clamp01()
}

pub fn synth_rain_layer(height: usize, width: usize, spec: &RainSpec) -> Result<ImageGrid> {
    let streaks = sample_streaks(height, width, spec)?;
    Ok(render_streaks(height, width, &streaks, spec))
}

pub fn screen_blend(clean: &ImageGrid, rain: &ImageGrid) -> Result<ImageGrid> {
    clean.same_dims(rain)?;
    Ok(clean.zip_map(rain, |a, b| 1.0 - (1.0 - a) * (1.0 - b)))
}

pub fn blend(clean: &ImageGrid, rain: &ImageGrid, mode: BlendMode) -> Result<ImageGrid> {
    match mode {
        BlendMode::Screen => screen_blend(clean, rain),
        BlendMode::Additive => {
            clean.same_dims(rain)?;
            Ok(clean.add(rain))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RainPair {
    pub clean: ImageGrid,
    pub rain_layer: ImageGrid,
    pub rainy: ImageGrid,
    pub spec: RainSpec,
    pub blend: BlendMode,
}

pub fn make_pair(clean: &ImageGrid, spec: &RainSpec, mode: BlendMode) -> Result<RainPair> {
    let rain_layer = synth_rain_layer(clean.height(), clean.width(), spec)?;
    let rainy = blend(clean, &rain_layer, mode)?;
    Ok(RainPair {
        clean: clean.clone(),
        rain_layer,
        rainy,
        spec: *spec,
        blend: mode,
    })
}
