//! Synthetic datasets on disk and in memory.
//!
//! A synthetic sample is written as three 8-bit PNGs, `<stem>_clean.png`,
//! `<stem>_rain.png` and `<stem>_rainy.png`, plus a `<stem>.json` sidecar
//! holding the [`RainSpec`] and blend mode that produced it.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::clean_scene;
use crate::error::{Result, UdgError};
use crate::eval::LabeledPair;
use crate::io::{load_gray, save_gray};
use crate::synth::{make_pair, BlendMode, RainPair, RainSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub id: String,
    pub spec: RainSpec,
    pub blend: BlendMode,
    pub clean: String,
    pub rain: String,
    pub rainy: String,
}

/// Writes one sample into `dir`; returns the sidecar path.
pub fn write_sample(dir: &Path, id: &str, pair: &RainPair) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| UdgError::io(dir, e))?;
    let sidecar = Sidecar {
        id: id.to_string(),
        spec: pair.spec,
        blend: pair.blend,
        clean: format!("{id}_clean.png"),
        rain: format!("{id}_rain.png"),
        rainy: format!("{id}_rainy.png"),
    };
    save_gray(&pair.clean, dir.join(&sidecar.clean))?;
    save_gray(&pair.rain_layer, dir.join(&sidecar.rain))?;
    save_gray(&pair.rainy, dir.join(&sidecar.rainy))?;
    let path = dir.join(format!("{id}.json"));
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serialises");
    std::fs::write(&path, text + "\n").map_err(|e| UdgError::io(&path, e))?;
    Ok(path)
}

/// Loads every sample described by a `*.json` sidecar in `dir`, sorted by id.
pub fn load_samples(dir: &Path) -> Result<Vec<LabeledPair>> {
    let mut sidecars = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| UdgError::io(dir, e))? {
        let path = entry.map_err(|e| UdgError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            sidecars.push(path);
        }
    }
    sidecars.sort();
    sidecars
        .iter()
        .map(|path| {
            let text = std::fs::read_to_string(path).map_err(|e| UdgError::io(path, e))?;
            let sc: Sidecar = serde_json::from_str(&text).map_err(|e| UdgError::io(path, e))?;
            let clean = load_gray(dir.join(&sc.clean))?;
            let rain_layer = load_gray(dir.join(&sc.rain))?;
            let rainy = load_gray(dir.join(&sc.rainy))?;
            clean.same_dims(&rainy)?;
            Ok(LabeledPair {
                id: sc.id,
                pair: RainPair {
                    clean,
                    rain_layer,
                    rainy,
                    spec: sc.spec,
                    blend: sc.blend,
                },
            })
        })
        .collect()
}

/// Procedural scenes with synthetic rain. Sample `k` uses scene seed
/// `seed + k`, rain seed `spec.seed + k`, and an angle drawn uniformly from
/// `spec.angle_degrees ± angle_spread`.
pub fn procedural_samples(
    count: usize,
    size: usize,
    seed: u64,
    spec: &RainSpec,
    angle_spread: f64,
    blend: BlendMode,
) -> Result<Vec<LabeledPair>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let jitter = if angle_spread > 0.0 {
                rng.random_range(-angle_spread..=angle_spread)
            } else {
                0.0
            };
            let s = RainSpec {
                angle_degrees: spec.angle_degrees + jitter,
                seed: spec.seed.wrapping_add(k as u64),
                ..*spec
            };
            let clean = clean_scene(size, size, seed.wrapping_add(k as u64));
            Ok(LabeledPair {
                id: format!("scene{k:03}"),
                pair: make_pair(&clean, &s, blend)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let spec = RainSpec {
            angle_degrees: 15.0,
            ..RainSpec::default()
        };
        let items = procedural_samples(2, 40, 7, &spec, 0.0, BlendMode::Screen).unwrap();
        for it in &items {
            write_sample(dir.path(), &it.id, &it.pair).unwrap();
        }
        let back = load_samples(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].id, "scene000");
        assert_eq!(back[1].pair.spec, items[1].pair.spec);
        assert!(back[0].pair.rainy.sub(&items[0].pair.rainy).max_abs() <= 0.5 / 255.0 + 1e-12);
    }

    #[test]
    fn angle_spread_is_bounded() {
        let spec = RainSpec::default();
        for it in procedural_samples(10, 32, 1, &spec, 45.0, BlendMode::Additive).unwrap() {
            assert!(it.pair.spec.angle_degrees.abs() <= 45.0);
        }
    }
}
