use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DEFAULT_Z_MIN;

/// Knobs shared by point-cloud construction, rendering and masking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    /// Near-plane cutoff in meters.
    pub z_min: f64,
    /// Relative depth margin beyond which a point counts as occluded.
    pub depth_tol: f64,
    /// Splat footprint is a `(2r+1)²` pixel square.
    pub splat_radius: u32,
    /// Depth pixels are sampled every `stride` rows and columns.
    pub stride: u32,
    /// Largest accepted |lateral| and |longitudinal| shift, meters.
    pub shift_bound: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            z_min: DEFAULT_Z_MIN,
            depth_tol: 0.03,
            splat_radius: 0,
            stride: 1,
            shift_bound: 8.0,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.z_min.is_finite() && self.z_min > 0.0) {
            return Err(Error::invalid(format!("z_min {} must be > 0", self.z_min)));
        }
        if !(self.depth_tol.is_finite() && self.depth_tol >= 0.0) {
            return Err(Error::invalid(format!("depth_tol {} must be >= 0", self.depth_tol)));
        }
        if self.stride == 0 {
            return Err(Error::invalid("stride must be >= 1"));
        }
        if !(self.shift_bound.is_finite() && self.shift_bound > 0.0) {
            return Err(Error::invalid(format!("shift_bound {} must be > 0", self.shift_bound)));
        }
        Ok(())
    }
}
