use crate::error::{Error, Result};

/// Height × width × channels, channel-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl LatentTensor {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::from_vec(height, width, channels, vec![0.0; height * width * channels])
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::invalid(format!("latent shape {height}x{width}x{channels} has a zero extent")));
        }
        if data.len() != height * width * channels {
            return Err(Error::invalid(format!(
                "latent {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("latent value {i} is {}", data[i])));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Standard-normal tensor from stream `key` of the counter RNG.
    pub fn gaussian(height: usize, width: usize, channels: usize, key: u64) -> Result<Self> {
        let mut data = vec![0.0; height * width * channels];
        crate::rng::fill_gaussian(key, &mut data);
        Self::from_vec(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub(crate) fn ensure_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::invalid(format!(
                "{what}: shapes {:?} and {:?} differ",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }

    /// Elementwise `f(a, b)`; the result must be finite.
    pub(crate) fn zip_with(&self, other: &Self, what: &str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_shape(other, what)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Self::from_vec(self.height, self.width, self.channels, data)
    }
}
