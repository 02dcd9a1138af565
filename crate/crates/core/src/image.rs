//! In-memory RGB images and metric depth maps.

use crate::error::{Error, Result};

/// 8-bit RGB image, row-major, top-left origin, channels interleaved.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl ImageBuffer {
    /// All-black image.
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; width as usize * height as usize * 3],
        }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::invalid(format!(
                "image {width}x{height} needs {expected} bytes, got {}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        let mut img = Self::new(width, height);
        for v in 0..height {
            for u in 0..width {
                img.set(u, v, f(u, v));
            }
        }
        img
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> [u8; 3] {
        self.get_index(v as usize * self.width as usize + u as usize)
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> [u8; 3] {
        let o = i * 3;
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    #[inline]
    pub fn set(&mut self, u: u32, v: u32, rgb: [u8; 3]) {
        self.set_index(v as usize * self.width as usize + u as usize, rgb);
    }

    #[inline]
    pub fn set_index(&mut self, i: usize, rgb: [u8; 3]) {
        let o = i * 3;
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    pub fn same_size(&self, width: u32, height: u32) -> bool {
        self.width == width && self.height == height
    }

    pub(crate) fn ensure_size(&self, width: u32, height: u32, what: &str) -> Result<()> {
        if self.same_size(width, height) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{what}: expected {width}x{height}, got {}x{}",
                self.width, self.height
            )))
        }
    }
}

/// Per-pixel depth along the camera +z axis in meters. A value of exactly
/// zero marks an invalid pixel; every other value is finite and positive.
#[derive(Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl std::fmt::Debug for DepthMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DepthMap")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("valid", &self.valid_count())
            .finish_non_exhaustive()
    }
}

impl DepthMap {
    /// All-invalid depth map.
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn from_values(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "depth map {width}x{height} needs {} values, got {}",
                width as usize * height as usize,
                values.len()
            )));
        }
        if let Some((i, d)) = values
            .iter()
            .enumerate()
            .find(|(_, d)| !(d.is_finite() && **d >= 0.0))
        {
            return Err(Error::invalid(format!(
                "depth value {d} at index {i} is neither positive nor the invalid marker 0"
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Decodes stored integer depth: `meters = stored * scale`, 0 stays invalid.
    pub fn from_quantized(width: u32, height: u32, stored: &[u16], scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(format!("depth scale {scale} must be > 0")));
        }
        let values = stored.iter().map(|&s| f64::from(s) * scale).collect();
        Self::from_values(width, height, values)
    }

    /// Encodes to integer depth, rounding to nearest. Depths that would not
    /// fit in 16 bits, or that round to zero, become invalid.
    pub fn quantize(&self, scale: f64) -> Vec<u16> {
        self.values
            .iter()
            .map(|&d| {
                if d <= 0.0 {
                    return 0;
                }
                let q = (d / scale + 0.5).floor();
                if q > f64::from(u16::MAX) {
                    0
                } else {
                    q as u16
                }
            })
            .collect()
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> f64 {
        self.values[v as usize * self.width as usize + u as usize]
    }

    #[inline]
    pub fn is_valid(&self, u: u32, v: u32) -> bool {
        self.get(u, v) > 0.0
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|&&d| d > 0.0).count()
    }
}
