//! Minimal RGB / grayscale raster types with PNG and PNM I/O.
//!
//! Intensities are stored as `f64` in `[0, 1]` (8-bit values divided by 255).

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, GrayImage as Gray8, ImageEncoder, ImageFormat, Luma, Rgb, RgbImage as Rgb8};

use crate::error::{MgspError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    pixels: Vec<[f64; 3]>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, pixels: Vec<[f64; 3]>) -> Result<Self> {
        if pixels.len() != height * width {
            return Err(MgspError::shape("rgb image", height * width, pixels.len()));
        }
        Ok(RgbImage { height, width, pixels })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let mut pixels = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        RgbImage { height, width, pixels }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, row: usize, col: usize) -> [f64; 3] {
        self.pixels[row * self.width + col]
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    /// One row-major plane per channel.
    pub fn channel(&self, ch: usize) -> Vec<f64> {
        self.pixels.iter().map(|p| p[ch]).collect()
    }

    pub fn from_channels(height: usize, width: usize, channels: [&[f64]; 3]) -> Result<Self> {
        for ch in channels {
            if ch.len() != height * width {
                return Err(MgspError::shape("rgb channel", height * width, ch.len()));
            }
        }
        let pixels = (0..height * width)
            .map(|p| [channels[0][p], channels[1][p], channels[2][p]])
            .collect();
        Ok(RgbImage { height, width, pixels })
    }

    /// ITU-R BT.601 luma.
    pub fn luma(&self) -> GrayImage {
        GrayImage {
            height: self.height,
            width: self.width,
            values: self
                .pixels
                .iter()
                .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path)?.to_rgb8();
        let (w, h) = img.dimensions();
        let pixels = img
            .pixels()
            .map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
            .collect();
        Ok(RgbImage {
            height: h as usize,
            width: w as usize,
            pixels,
        })
    }

    /// Saves as PNG, or PPM for `.ppm`/`.pnm`, quantizing to 8 bits.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut img = Rgb8::new(self.width as u32, self.height as u32);
        for (k, px) in img.pixels_mut().enumerate() {
            let p = self.pixels[k];
            *px = Rgb([quantize(p[0]), quantize(p[1]), quantize(p[2])]);
        }
        write_raster(path, img.as_raw(), self.width, self.height, ExtendedColorType::Rgb8)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(MgspError::shape("gray image", height * width, values.len()));
        }
        Ok(GrayImage { height, width, values })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Saves as PNG, or PGM for `.pgm`/`.pnm`, clamping to `[0, 1]`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut img = Gray8::new(self.width as u32, self.height as u32);
        for (px, v) in img.pixels_mut().zip(&self.values) {
            *px = Luma([quantize(*v)]);
        }
        write_raster(path, img.as_raw(), self.width, self.height, ExtendedColorType::L8)
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn write_raster(path: &Path, raw: &[u8], width: usize, height: usize, color: ExtendedColorType) -> Result<()> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    if matches!(ext.as_deref(), Some("ppm" | "pgm" | "pnm")) {
        let subtype = match color {
            ExtendedColorType::L8 => PnmSubtype::Graymap(SampleEncoding::Binary),
            _ => PnmSubtype::Pixmap(SampleEncoding::Binary),
        };
        let out = BufWriter::new(File::create(path)?);
        PnmEncoder::new(out)
            .with_subtype(subtype)
            .write_image(raw, width as u32, height as u32, color)?;
    } else {
        image::save_buffer_with_format(path, raw, width as u32, height as u32, color, ImageFormat::Png)?;
    }
    Ok(())
}

/// Binary map as a black/white grayscale image (set pixels white).
pub fn save_binary_map(path: &Path, height: usize, width: usize, map: &[bool]) -> Result<()> {
    let values = map.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    GrayImage::new(height, width, values)?.save(path)
}
