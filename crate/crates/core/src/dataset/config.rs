use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::ShiftSampler;
use crate::error::{Error, Result};
use crate::params::PipelineParams;

/// Everything that determines a dataset's bytes, plus the worker count
/// (which does not, and is therefore never written back out).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub params: PipelineParams,
    pub sampler: ShiftSampler,
    #[serde(skip_serializing)]
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            params: PipelineParams::default(),
            sampler: ShiftSampler::default(),
            workers: 1,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|source| Error::Json {
            path: origin.to_path_buf(),
            source,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.sampler.validate(self.params.shift_bound)?;
        if self.workers == 0 {
            return Err(Error::invalid("workers must be >= 1"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}
