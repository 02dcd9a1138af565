use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::ShiftSpec;
use crate::rng;

/// Uniform shifts over `[-lateral_range, lateral_range]` (and likewise for
/// the longitudinal axis). Each `(frame, camera)` gets its own counter
/// stream, so the draw for a sample never depends on processing order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftSampler {
    pub seed: u64,
    pub lateral_range: f64,
    pub longitudinal_range: f64,
}

impl Default for ShiftSampler {
    fn default() -> Self {
        Self {
            seed: 0,
            lateral_range: 1.0,
            longitudinal_range: 0.0,
        }
    }
}

fn draw(key: u64, counter: u64, range: f64) -> f64 {
    if range == 0.0 {
        0.0
    } else {
        (2.0 * rng::uniform(key, counter) - 1.0) * range
    }
}

impl ShiftSampler {
    pub fn new(seed: u64, lateral_range: f64) -> Self {
        Self {
            seed,
            lateral_range,
            ..Self::default()
        }
    }

    pub fn validate(&self, bound: f64) -> Result<()> {
        for (name, r) in [("lateral_range", self.lateral_range), ("longitudinal_range", self.longitudinal_range)] {
            if !(r.is_finite() && r >= 0.0 && r <= bound) {
                return Err(Error::invalid(format!("{name} {r} must lie in [0, {bound}]")));
            }
        }
        Ok(())
    }

    pub fn shift_for(&self, frame: usize, camera: u16) -> ShiftSpec {
        let key = rng::derive(rng::derive(self.seed, frame as u64), u64::from(camera));
        ShiftSpec {
            lateral: draw(key, 0, self.lateral_range),
            longitudinal: draw(key, 1, self.longitudinal_range),
            ..ShiftSpec::default()
        }
    }
}
