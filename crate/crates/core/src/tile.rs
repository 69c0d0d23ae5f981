//! Tiled and multi-channel deraining.
//!
//! Large images are cut into overlapping square tiles that share one
//! globally resolved streak angle. Tiles are solved independently and
//! recombined with linear ramps across each overlap, so neighbouring
//! solutions cross-fade instead of meeting at a hard edge.

use serde::{Deserialize, Serialize};

use crate::angle::AngleSearch;
use crate::error::{Result, UdgError};
use crate::exec::Exec;
use crate::image::ImageGrid;
use crate::io::ColorImage;
use crate::solver::{derain_at, AngleUsed, UdgParams};

/// Images with either side above this are tiled under [`Tiling::Auto`].
pub const AUTO_TILE_THRESHOLD: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TileConfig {
    pub size: usize,
    pub overlap: usize,
}

impl Default for TileConfig {
    fn default() -> Self {
        Self { size: 128, overlap: 16 }
    }
}

impl TileConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size < 32 {
            return Err(UdgError::param("tile.size", "must be >= 32"));
        }
        if self.overlap == 0 || 2 * self.overlap > self.size {
            return Err(UdgError::param("tile.overlap", "must be in [1, size / 2]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum Tiling {
    /// Tile only when the image exceeds [`AUTO_TILE_THRESHOLD`].
    #[default]
    Auto,
    Always(TileConfig),
    Never,
}

impl Tiling {
    /// The tile layout this policy picks for an image of the given size.
    pub fn config_for(&self, height: usize, width: usize) -> Option<TileConfig> {
        match *self {
            Tiling::Auto if height.max(width) > AUTO_TILE_THRESHOLD => Some(TileConfig::default()),
            Tiling::Always(cfg) => Some(cfg),
            _ => None,
        }
    }
}

/// Tile start offsets along one axis. Consecutive tiles overlap by at least
/// `overlap`; the last tile ends flush with the border.
pub fn tile_origins(len: usize, size: usize, overlap: usize) -> Vec<usize> {
    if len <= size {
        return vec![0];
    }
    let step = size - overlap;
    let mut out: Vec<usize> = (0..).map(|k| k * step).take_while(|&o| o + size < len).collect();
    out.push(len - size);
    out
}

/// Blending weight along one axis for a tile spanning `[start, start + n)`
/// inside `[0, len)`: ramps over `overlap` pixels on interior sides only.
fn axis_weights(start: usize, n: usize, len: usize, overlap: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let mut w: f64 = 1.0;
            if start > 0 {
                w = w.min((k as f64 + 0.5) / overlap as f64);
            }
            if start + n < len {
                w = w.min((n as f64 - k as f64 - 0.5) / overlap as f64);
            }
            w.clamp(0.0, 1.0)
        })
        .collect()
}

/// A solved single-channel image.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneResult {
    pub x: ImageGrid,
    pub r: ImageGrid,
    /// Largest outer-iteration count over tiles.
    pub iters_used: usize,
    /// Sum of final tile energies.
    pub final_energy: f64,
    pub converged: bool,
    pub tiles: usize,
    pub warnings: Vec<String>,
}

/// Derains one plane with a fixed angle, tiling when `tiles` is given.
pub fn derain_plane(
    y: &ImageGrid,
    params: &UdgParams,
    used: AngleUsed,
    tiles: Option<TileConfig>,
    exec: Exec,
) -> Result<PlaneResult> {
    let (h, w) = y.dims();
    let Some(cfg) = tiles else {
        let res = derain_at(y, params, used)?;
        return Ok(PlaneResult {
            final_energy: res.final_energy(),
            x: res.x,
            r: res.r,
            iters_used: res.iters_used,
            converged: res.converged,
            tiles: 1,
            warnings: res.warnings,
        });
    };
    cfg.validate()?;
    let (th, tw) = (cfg.size.min(h), cfg.size.min(w));
    let rows = tile_origins(h, th, cfg.overlap);
    let cols = tile_origins(w, tw, cfg.overlap);
    let origins: Vec<(usize, usize)> = rows.iter().flat_map(|&i| cols.iter().map(move |&j| (i, j))).collect();
    let solved = exec.map(&origins, |&(i, j)| {
        let tile = y.crop(i, j, th, tw)?;
        derain_at(&tile, params, used)
    });

    let mut x_acc = ImageGrid::zeros(h, w);
    let mut r_acc = ImageGrid::zeros(h, w);
    let mut weight = ImageGrid::zeros(h, w);
    let mut out = PlaneResult {
        x: ImageGrid::zeros(h, w),
        r: ImageGrid::zeros(h, w),
        iters_used: 0,
        final_energy: 0.0,
        converged: true,
        tiles: origins.len(),
        warnings: Vec::new(),
    };
    for (&(i0, j0), res) in origins.iter().zip(solved) {
        let res = res?;
        let wr = axis_weights(i0, th, h, cfg.overlap);
        let wc = axis_weights(j0, tw, w, cfg.overlap);
        for i in 0..th {
            for j in 0..tw {
                let wt = wr[i] * wc[j];
                x_acc[(i0 + i, j0 + j)] += wt * res.x.get(i, j);
                r_acc[(i0 + i, j0 + j)] += wt * res.r.get(i, j);
                weight[(i0 + i, j0 + j)] += wt;
            }
        }
        out.iters_used = out.iters_used.max(res.iters_used);
        out.final_energy += res.final_energy();
        out.converged &= res.converged;
        for msg in res.warnings {
            if !out.warnings.contains(&msg) {
                out.warnings.push(msg);
            }
        }
    }
    out.x = x_acc.zip_map(&weight, |v, wt| v / wt);
    out.r = r_acc.zip_map(&weight, |v, wt| v / wt);
    Ok(out)
}

/// A solved grayscale or colour image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageResult {
    pub x: ColorImage,
    pub r: ColorImage,
    pub angle: AngleUsed,
    pub iters_used: usize,
    pub final_energy: f64,
    pub converged: bool,
    pub tiles: usize,
    pub warnings: Vec<String>,
}

/// Derains every channel with one angle, resolved on the luma plane.
pub fn derain_image(
    y: &ColorImage,
    params: &UdgParams,
    angle: Option<f64>,
    search: &AngleSearch,
    tiling: Tiling,
    exec: Exec,
) -> Result<ImageResult> {
    params.validate()?;
    let (h, w) = y.dims();
    if h < 32 || w < 32 {
        return Err(UdgError::InvalidInput(format!(
            "deraining needs at least 32x32, got {h}x{w}"
        )));
    }
    let used = AngleUsed::resolve(&y.luma(), angle, search)?;
    let tiles = tiling.config_for(h, w);
    let planes = y
        .channels
        .iter()
        .map(|c| derain_plane(c, params, used, tiles, exec))
        .collect::<Result<Vec<_>>>()?;
    let mut warnings = Vec::new();
    for msg in planes.iter().flat_map(|p| p.warnings.iter()) {
        if !warnings.contains(msg) {
            warnings.push(msg.clone());
        }
    }
    Ok(ImageResult {
        x: ColorImage {
            channels: planes.iter().map(|p| p.x.clone()).collect(),
            depth: y.depth,
        },
        r: ColorImage {
            channels: planes.iter().map(|p| p.r.clone()).collect(),
            depth: y.depth,
        },
        angle: used,
        iters_used: planes.iter().map(|p| p.iters_used).max().unwrap_or(0),
        final_energy: planes.iter().map(|p| p.final_energy).sum(),
        converged: planes.iter().all(|p| p.converged),
        tiles: planes.first().map_or(0, |p| p.tiles),
        warnings,
    })
}
