//! One directory per sample: `raw.ppm`, `cond.ppm`, `mask.pgm` (flag codes
//! 0/64/128/255) and `meta.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::ConditionSample;
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::netpbm;
use crate::params::PipelineParams;
use crate::render::{OcclusionMask, ShiftSpec};

pub const PIPELINE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleMeta {
    pub pipeline_version: u32,
    pub frame: usize,
    pub camera: u16,
    pub camera_name: String,
    pub neighbor: Option<u16>,
    pub neighbor_name: Option<String>,
    pub shift: ShiftSpec,
    pub params: PipelineParams,
    pub width: u32,
    pub height: u32,
    pub mask_fraction: f64,
}

pub fn sample_dir_name(frame: usize, camera_name: &str) -> String {
    format!("{frame:06}_{camera_name}")
}

pub fn write_sample(sample: &ConditionSample, dir: &Path) -> Result<()> {
    let (w, h) = (sample.raw.width(), sample.raw.height());
    sample.condition.ensure_size(w, h, "condition")?;
    sample.mask.ensure_size(w, h, "sample")?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    netpbm::write_ppm(&dir.join("raw.ppm"), &sample.raw)?;
    netpbm::write_ppm(&dir.join("cond.ppm"), &sample.condition)?;
    netpbm::write_pgm8(&dir.join("mask.pgm"), w, h, &sample.mask.codes())?;
    let meta = SampleMeta {
        pipeline_version: PIPELINE_VERSION,
        frame: sample.frame,
        camera: sample.camera,
        camera_name: sample.camera_name.clone(),
        neighbor: sample.neighbor,
        neighbor_name: sample.neighbor_name.clone(),
        shift: sample.shift,
        params: sample.params,
        width: w,
        height: h,
        mask_fraction: sample.mask.masked_fraction(),
    };
    let path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn read_meta(dir: &Path) -> Result<SampleMeta> {
    let path = dir.join("meta.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: SampleMeta = serde_json::from_str(&text).map_err(|source| Error::Json { path: path.clone(), source })?;
    if meta.pipeline_version != PIPELINE_VERSION {
        return Err(Error::Format {
            path,
            reason: format!("pipeline version {} (expected {PIPELINE_VERSION})", meta.pipeline_version),
        });
    }
    Ok(meta)
}

fn check_size(path: &Path, what: &str, got: (u32, u32), want: (u32, u32)) -> Result<()> {
    if got != want {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: format!("{what} is {}x{}, meta says {}x{}", got.0, got.1, want.0, want.1),
        });
    }
    Ok(())
}

fn read_image(path: &Path, want: (u32, u32)) -> Result<ImageBuffer> {
    let img = netpbm::read_ppm(path)?;
    check_size(path, "image", (img.width(), img.height()), want)?;
    Ok(img)
}

pub fn read_sample(dir: &Path) -> Result<ConditionSample> {
    let meta = read_meta(dir)?;
    let size = (meta.width, meta.height);
    let raw = read_image(&dir.join("raw.ppm"), size)?;
    let condition = read_image(&dir.join("cond.ppm"), size)?;
    let mask_path = dir.join("mask.pgm");
    let (mw, mh, codes) = netpbm::read_pgm8(&mask_path)?;
    check_size(&mask_path, "mask", (mw, mh), size)?;
    let mask = OcclusionMask::from_codes(mw, mh, &codes).map_err(|e| Error::Format {
        path: mask_path.clone(),
        reason: e.to_string(),
    })?;
    Ok(ConditionSample {
        raw,
        condition,
        mask,
        shift: meta.shift,
        frame: meta.frame,
        camera: meta.camera,
        camera_name: meta.camera_name,
        neighbor: meta.neighbor,
        neighbor_name: meta.neighbor_name,
        params: meta.params,
    })
}
