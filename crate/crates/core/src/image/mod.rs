//! Raster types and the primitives every metric is built from.

mod filter;
mod io;

pub use filter::{
    crop, downscale_half, gaussian_filter, gaussian_kernel, random_crops, resize_area,
    resize_bilinear,
};
pub(crate) use filter::crop_rects;
pub use io::{encode_png, load_image, save_image, save_png, save_pnm};

use crate::error::{Error, Result};

/// Decoded 8-bit raster, row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::dim("image must be at least 1x1"));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Format(format!("{channels} channels; expected 1 or 3")));
        }
        if data.len() != width * height * channels {
            return Err(Error::dim(format!(
                "buffer of {} bytes does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Splits into one float plane per channel.
    pub fn channel_planes(&self) -> Vec<ImagePlane> {
        (0..self.channels)
            .map(|c| {
                let data = self.data.iter().skip(c).step_by(self.channels).map(|&v| v as f64).collect();
                ImagePlane { width: self.width, height: self.height, data }
            })
            .collect()
    }

    /// Interleaves planes back into 8-bit samples, rounding half away from zero and clamping.
    pub fn from_planes(planes: &[ImagePlane]) -> Result<Self> {
        let first = planes.first().ok_or_else(|| Error::EmptyInput("no planes".into()))?;
        let (w, h) = (first.width, first.height);
        if planes.iter().any(|p| p.width != w || p.height != h) {
            return Err(Error::dim("planes differ in size"));
        }
        let c = planes.len();
        let mut data = vec![0u8; w * h * c];
        for (ci, p) in planes.iter().enumerate() {
            for (i, &v) in p.data.iter().enumerate() {
                data[i * c + ci] = quantize(v);
            }
        }
        Self::new(w, h, c, data)
    }
}

#[inline]
pub(crate) fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Single-channel floating-point working plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::dim("plane must be at least 1x1"));
        }
        if data.len() != width * height {
            return Err(Error::dim(format!(
                "plane data of length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("plane contains non-finite samples".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    // Constructors used internally where the invariants hold by construction.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self { width, height, data }
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

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn same_dims(&self, other: &ImagePlane) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> ImagePlane {
        Self::from_raw(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ImagePlane, f: impl Fn(f64, f64) -> f64) -> Result<ImagePlane> {
        if !self.same_dims(other) {
            return Err(Error::dim(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::from_raw(self.width, self.height, data))
    }

    /// Left-right mirror.
    pub fn mirror(&self) -> ImagePlane {
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.data.chunks(self.width) {
            data.extend(row.iter().rev());
        }
        Self::from_raw(self.width, self.height, data)
    }

    /// Rotates 90° counter-clockwise.
    pub fn rotate90(&self) -> ImagePlane {
        let (w, h) = (self.height, self.width);
        let mut data = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                data[y * w + x] = self.get(self.width - 1 - y, x);
            }
        }
        Self::from_raw(w, h, data)
    }
}

/// Axis-aligned crop rectangle in pixel units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CropRect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl CropRect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.x + self.w <= width && self.y + self.h <= height
    }
}

/// BT.601 luma, unrounded. Single-channel input is copied.
pub fn to_luma(img: &ImageBuffer) -> ImagePlane {
    let data = match img.channels {
        1 => img.data.iter().map(|&v| v as f64).collect(),
        _ => img
            .data
            .chunks_exact(3)
            .map(|px| 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64)
            .collect(),
    };
    ImagePlane::from_raw(img.width, img.height, data)
}
