//! Grayscale image and mask I/O.
//!
//! Intensities are stored as `f64` in `[0, 1]`, row-major. Only PNG and
//! binary PGM (P5) are read and written.

use std::path::Path;

use image::{GrayImage as RawGray, ImageFormat, ImageReader, Luma};

use crate::error::{Error, Result};

/// Smallest side length the segmentation pipeline accepts.
pub const MIN_SIDE: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    /// Builds an image from normalized intensities.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Format(format!("image is {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::Contract(format!(
                "expected {} intensities, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Contract(format!("intensity {v} outside [0,1]")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_u8(width: usize, height: usize, raw: &[u8]) -> Result<Self> {
        Self::new(
            width,
            height,
            raw.iter().map(|&v| f64::from(v) / 255.0).collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Contract(format!(
                "expected {} mask values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn same_shape(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }
}

/// Per-pixel scalar map with values in `[0, 1]` (saliency, cue maps).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ScalarMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Contract(format!(
                "expected {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len().max(1) as f64
    }
}

fn read_luma(path: &Path) -> Result<RawGray> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        other => {
            return Err(Error::Format(format!(
                "{}: unsupported format {other:?}, expected PNG or PGM",
                path.display()
            )))
        }
    }
    let img = reader.decode().map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other}", path.display())),
    })?;
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::Format(format!("{}: zero-sized image", path.display())));
    }
    Ok(to_luma_average(img))
}

// Channel average, not the weighted luma that `to_luma8` applies.
fn to_luma_average(img: image::DynamicImage) -> RawGray {
    use image::DynamicImage as D;
    match img {
        D::ImageLuma8(g) => g,
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = rgb.dimensions();
            RawGray::from_fn(w, h, |x, y| {
                let p = rgb.get_pixel(x, y).0;
                let sum = u32::from(p[0]) + u32::from(p[1]) + u32::from(p[2]);
                Luma([((sum + 1) / 3) as u8])
            })
        }
    }
}

/// Loads an 8-bit grayscale PNG or PGM, dividing raw values by 255.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let raw = read_luma(path.as_ref())?;
    GrayImage::from_u8(raw.width() as usize, raw.height() as usize, raw.as_raw())
}

/// Loads a ground-truth mask; any nonzero pixel is foreground.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let raw = read_luma(path.as_ref())?;
    BinaryMask::new(
        raw.width() as usize,
        raw.height() as usize,
        raw.as_raw().iter().map(|&v| v != 0).collect(),
    )
}

/// Round-half-up to 8 bits.
pub fn quantize(value: f64) -> u8 {
    (value * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

fn save_raw(raw: &RawGray, path: &Path) -> Result<()> {
    let format = match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("pgm") | Some("pnm") => ImageFormat::Pnm,
        _ => ImageFormat::Png,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    if format == ImageFormat::Pnm {
        // The image crate emits ASCII PGM by default; write P5 by hand.
        let mut bytes = format!("P5\n{} {}\n255\n", raw.width(), raw.height()).into_bytes();
        bytes.extend_from_slice(raw.as_raw());
        return std::fs::write(path, bytes).map_err(|e| Error::io(path, e));
    }
    raw.save_with_format(path, format).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Format(other.to_string()),
    })
}

/// Writes a `[0,1]` map as an 8-bit image, `pixel = round(255 * value)`.
pub fn write_saliency(map: &ScalarMap, path: impl AsRef<Path>) -> Result<()> {
    if let Some(v) = map
        .data
        .iter()
        .find(|v| !(0.0..=1.0).contains(*v) || v.is_nan())
    {
        return Err(Error::Contract(format!("saliency value {v} outside [0,1]")));
    }
    let bytes: Vec<u8> = map.data.iter().map(|&v| quantize(v)).collect();
    let raw = RawGray::from_raw(map.width as u32, map.height as u32, bytes)
        .ok_or_else(|| Error::Internal("buffer size mismatch".into()))?;
    save_raw(&raw, path.as_ref())
}

pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = mask.data.iter().map(|&v| if v { 255 } else { 0 }).collect();
    let raw = RawGray::from_raw(mask.width as u32, mask.height as u32, bytes)
        .ok_or_else(|| Error::Internal("buffer size mismatch".into()))?;
    save_raw(&raw, path.as_ref())
}

/// Writes an RGB visualization (label grids, layer overlays).
pub fn write_rgb(width: usize, height: usize, rgb: Vec<u8>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let img = image::RgbImage::from_raw(width as u32, height as u32, rgb)
        .ok_or_else(|| Error::Internal("rgb buffer size mismatch".into()))?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::Format(e.to_string()))
}

/// Deterministic pseudo-random color for a label index.
pub fn label_color(label: usize) -> [u8; 3] {
    let mut h = (label as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    h ^= h >> 29;
    [(h & 0xff) as u8, ((h >> 8) & 0xff) as u8, ((h >> 16) & 0xff) as u8]
}
