//! PNG input/output (8/16-bit, grayscale or RGB).

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, ImageReader, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::error::{Result, UdgError};
use crate::image::ImageGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

/// One plane per channel: one for grayscale, three (R, G, B) for colour.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorImage {
    pub channels: Vec<ImageGrid>,
    pub depth: BitDepth,
}

impl ColorImage {
    pub fn gray(plane: ImageGrid) -> Self {
        Self {
            channels: vec![plane],
            depth: BitDepth::Eight,
        }
    }

    pub fn rgb(r: ImageGrid, g: ImageGrid, b: ImageGrid) -> Result<Self> {
        r.same_dims(&g)?;
        r.same_dims(&b)?;
        Ok(Self {
            channels: vec![r, g, b],
            depth: BitDepth::Eight,
        })
    }

    pub fn with_depth(mut self, depth: BitDepth) -> Self {
        self.depth = depth;
        self
    }

    pub fn dims(&self) -> (usize, usize) {
        self.channels[0].dims()
    }

    pub fn is_rgb(&self) -> bool {
        self.channels.len() == 3
    }

    /// Luma (`0.299 R + 0.587 G + 0.114 B`); the plane itself for grayscale.
    pub fn luma(&self) -> ImageGrid {
        if self.is_rgb() {
            let [r, g, b] = [&self.channels[0], &self.channels[1], &self.channels[2]];
            ImageGrid::from_fn(r.height(), r.width(), |i, j| {
                0.299 * r.get(i, j) + 0.587 * g.get(i, j) + 0.114 * b.get(i, j)
            })
        } else {
            self.channels[0].clone()
        }
    }

    /// Applies `f` to every channel, keeping depth.
    pub fn map_channels(&self, f: impl Fn(&ImageGrid) -> ImageGrid) -> Self {
        Self {
            channels: self.channels.iter().map(f).collect(),
            depth: self.depth,
        }
    }
}

fn planes_from<P, const N: usize>(w: u32, h: u32, data: &[P], scale: f64) -> Vec<ImageGrid>
where
    P: Copy + Into<f64>,
{
    let (w, h) = (w as usize, h as usize);
    (0..N)
        .map(|c| {
            ImageGrid::from_fn(h, w, |i, j| data[(i * w + j) * N + c].into() / scale)
        })
        .collect()
}

/// Reads a PNG into per-channel planes scaled to `[0, 1]`. Alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<ColorImage> {
    let path = path.as_ref();
    let mut reader = ImageReader::open(path).map_err(|e| UdgError::io(path, e))?;
    reader.set_format(ImageFormat::Png);
    let decoded = reader.decode().map_err(|e| UdgError::io(path, e))?;
    let (w, h) = (decoded.width(), decoded.height());
    let (channels, depth) = match decoded {
        DynamicImage::ImageLuma8(b) => (planes_from::<u8, 1>(w, h, b.as_raw(), 255.0), BitDepth::Eight),
        DynamicImage::ImageLumaA8(b) => {
            let rgb = DynamicImage::ImageLumaA8(b).into_luma8();
            (planes_from::<u8, 1>(w, h, rgb.as_raw(), 255.0), BitDepth::Eight)
        }
        DynamicImage::ImageRgb8(b) => (planes_from::<u8, 3>(w, h, b.as_raw(), 255.0), BitDepth::Eight),
        DynamicImage::ImageRgba8(b) => {
            let rgb = DynamicImage::ImageRgba8(b).into_rgb8();
            (planes_from::<u8, 3>(w, h, rgb.as_raw(), 255.0), BitDepth::Eight)
        }
        DynamicImage::ImageLuma16(b) => (planes_from::<u16, 1>(w, h, b.as_raw(), 65535.0), BitDepth::Sixteen),
        DynamicImage::ImageLumaA16(b) => {
            let g = DynamicImage::ImageLumaA16(b).into_luma16();
            (planes_from::<u16, 1>(w, h, g.as_raw(), 65535.0), BitDepth::Sixteen)
        }
        DynamicImage::ImageRgb16(b) => (planes_from::<u16, 3>(w, h, b.as_raw(), 65535.0), BitDepth::Sixteen),
        DynamicImage::ImageRgba16(b) => {
            let rgb = DynamicImage::ImageRgba16(b).into_rgb16();
            (planes_from::<u16, 3>(w, h, rgb.as_raw(), 65535.0), BitDepth::Sixteen)
        }
        other => {
            return Err(UdgError::io(
                path,
                format!("unsupported pixel format {:?}", other.color()),
            ))
        }
    };
    Ok(ColorImage { channels, depth })
}

/// Reads a PNG as a single plane (luma for colour input).
pub fn load_gray(path: impl AsRef<Path>) -> Result<ImageGrid> {
    Ok(load_image(path)?.luma())
}

fn quantize<T>(planes: &[ImageGrid], max: f64) -> Vec<T>
where
    T: TryFrom<u32>,
    <T as TryFrom<u32>>::Error: std::fmt::Debug,
{
    let (h, w) = planes[0].dims();
    let n = planes.len();
    let mut out = Vec::with_capacity(h * w * n);
    for k in 0..h * w {
        for p in planes {
            let v = (p.values()[k].clamp(0.0, 1.0) * max).round() as u32;
            out.push(T::try_from(v).expect("clamped value fits"));
        }
    }
    out
}

/// Writes planes to PNG, clamping to `[0, 1]` and quantising to the image's
/// bit depth.
pub fn save_image(img: &ColorImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (h, w) = img.dims();
    if img.channels.len() != 1 && img.channels.len() != 3 {
        return Err(UdgError::io(path, format!("cannot save {} channels", img.channels.len())));
    }
    for c in &img.channels {
        if c.dims() != (h, w) {
            return Err(UdgError::io(path, "channel dimensions differ"));
        }
    }
    let (w32, h32) = (w as u32, h as u32);
    let dynamic = match (img.channels.len(), img.depth) {
        (1, BitDepth::Eight) => DynamicImage::ImageLuma8(
            ImageBuffer::<Luma<u8>, _>::from_raw(w32, h32, quantize::<u8>(&img.channels, 255.0))
                .expect("buffer size matches"),
        ),
        (1, BitDepth::Sixteen) => DynamicImage::ImageLuma16(
            ImageBuffer::<Luma<u16>, _>::from_raw(w32, h32, quantize::<u16>(&img.channels, 65535.0))
                .expect("buffer size matches"),
        ),
        (_, BitDepth::Eight) => DynamicImage::ImageRgb8(
            ImageBuffer::<Rgb<u8>, _>::from_raw(w32, h32, quantize::<u8>(&img.channels, 255.0))
                .expect("buffer size matches"),
        ),
        (_, BitDepth::Sixteen) => DynamicImage::ImageRgb16(
            ImageBuffer::<Rgb<u16>, _>::from_raw(w32, h32, quantize::<u16>(&img.channels, 65535.0))
                .expect("buffer size matches"),
        ),
    };
    dynamic
        .save_with_format(path, ImageFormat::Png)
        .map_err(|e| UdgError::io(path, e))
}

/// Writes a single plane as 8-bit grayscale.
pub fn save_gray(img: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    save_image(&ColorImage::gray(img.clone()), path)
}
