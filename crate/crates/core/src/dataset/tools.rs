//! Whole-dataset operations: build a directory, list, verify, report.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::build::{build_condition_frame, histogram_bin, stream_build, BuildStats, DirectorySink, HISTOGRAM_BINS};
use crate::dataset::sample_io::{read_meta, read_sample, sample_dir_name};
use crate::dataset::{load_manifest, PipelineConfig, SceneManifest};
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::netpbm;

const INDEX_FILE: &str = "dataset.json";
const INDEX_VERSION: u32 = 1;
const SHEET_ROWS: usize = 8;

/// `dataset.json` at the dataset root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetIndex {
    pub format_version: u32,
    pub scene: String,
    /// Directory (relative to the root) holding the sample directories.
    pub samples_dir: PathBuf,
    pub manifest: PathBuf,
    pub cameras: Vec<String>,
    pub frames: usize,
    pub config: PipelineConfig,
}

fn safe_dir_name(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    if s.is_empty() || s.chars().all(|c| c == '.') {
        "scene".into()
    } else {
        s
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializes") + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads the manifest, writes `dataset.json`, `effective_config.json` and
/// one directory per sample under `<out>/<scene>/`.
pub fn build_dataset(manifest_path: &Path, out: &Path, config: &PipelineConfig) -> Result<BuildStats> {
    config.validate()?;
    let scene = load_manifest(manifest_path)?;
    let manifest = fs::canonicalize(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let samples_dir = PathBuf::from(safe_dir_name(&scene.name));
    let root = out.join(&samples_dir);
    fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    let index = DatasetIndex {
        format_version: INDEX_VERSION,
        scene: scene.name.clone(),
        samples_dir,
        manifest,
        cameras: scene.rig.cameras().iter().map(|c| c.name.clone()).collect(),
        frames: scene.frames.len(),
        config: config.clone(),
    };
    write_json(&out.join(INDEX_FILE), &index)?;
    let cfg_path = out.join("effective_config.json");
    fs::write(&cfg_path, config.to_json()).map_err(|e| Error::io(&cfg_path, e))?;
    let mut sink = DirectorySink { root };
    stream_build(&scene, &config.sampler, &config.params, config.workers, &mut sink).map_err(|f| f.error)
}

pub fn read_index(dataset: &Path) -> Result<DatasetIndex> {
    let path = dataset.join(INDEX_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let index: DatasetIndex = serde_json::from_str(&text).map_err(|source| Error::Json { path: path.clone(), source })?;
    if index.format_version != INDEX_VERSION {
        return Err(Error::Format {
            path,
            reason: format!("dataset format {} (expected {INDEX_VERSION})", index.format_version),
        });
    }
    Ok(index)
}

/// Sample directories in `(frame, camera)` name order.
pub fn list_samples(dataset: &Path) -> Result<Vec<PathBuf>> {
    let index = read_index(dataset)?;
    let root = dataset.join(&index.samples_dir);
    let entries = fs::read_dir(&root).map_err(|e| Error::io(&root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&root, e))?.path();
        if path.join("meta.json").is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub checked: usize,
    pub mismatches: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn verify_one(scene: &SceneManifest, dir: &Path) -> Result<Option<String>> {
    let stored = read_sample(dir)?;
    let id = scene.rig.index_of(&stored.camera_name)?;
    if id != stored.camera {
        return Ok(Some(format!("camera id {} does not match rig index {id}", stored.camera)));
    }
    let rebuilt = build_condition_frame(scene, stored.frame, id, &stored.shift, &stored.params)?;
    let what = [
        (rebuilt.raw != stored.raw, "raw"),
        (rebuilt.mask != stored.mask, "mask"),
        (rebuilt.condition != stored.condition, "condition"),
        (rebuilt.neighbor != stored.neighbor || rebuilt.neighbor_name != stored.neighbor_name, "neighbor"),
    ];
    let bad: Vec<_> = what.iter().filter(|(b, _)| *b).map(|(_, n)| *n).collect();
    Ok((!bad.is_empty()).then(|| format!("{} differs", bad.join(", "))))
}

/// Rebuilds every stored sample from the source scene and compares bytes.
pub fn verify_dataset(dataset: &Path) -> Result<VerifyReport> {
    let index = read_index(dataset)?;
    let scene = load_manifest(&index.manifest)?;
    let mut report = VerifyReport::default();
    let mut expected = Vec::new();
    for f in 0..scene.frames.len() {
        for cam in scene.rig.cameras() {
            expected.push(sample_dir_name(f, &cam.name));
        }
    }
    let root = dataset.join(&index.samples_dir);
    for name in expected {
        let dir = root.join(&name);
        if !dir.join("meta.json").is_file() {
            report.mismatches.push(format!("{name}: missing"));
            continue;
        }
        report.checked += 1;
        match verify_one(&scene, &dir) {
            Ok(None) => {}
            Ok(Some(m)) => report.mismatches.push(format!("{name}: {m}")),
            Err(e) => report.mismatches.push(format!("{name}: {e}")),
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub samples: usize,
    pub histogram: [u64; HISTOGRAM_BINS],
    pub histogram_csv: PathBuf,
    pub contact_sheet: PathBuf,
}

/// Writes `mask_histogram.csv` and `contact_sheet.ppm` (raw | condition |
/// mask per row, first samples only) into `out`.
pub fn report_dataset(dataset: &Path, out: &Path) -> Result<ReportSummary> {
    let dirs = list_samples(dataset)?;
    let mut histogram = [0u64; HISTOGRAM_BINS];
    for d in &dirs {
        histogram[histogram_bin(read_meta(d)?.mask_fraction)] += 1;
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let mut csv = String::from("bin_start,bin_end,count\n");
    for (i, c) in histogram.iter().enumerate() {
        csv += &format!("{:.1},{:.1},{c}\n", i as f64 / 10.0, (i + 1) as f64 / 10.0);
    }
    let histogram_csv = out.join("mask_histogram.csv");
    fs::write(&histogram_csv, csv).map_err(|e| Error::io(&histogram_csv, e))?;

    let rows: Vec<_> = dirs.iter().take(SHEET_ROWS).map(|d| read_sample(d)).collect::<Result<_>>()?;
    let (w, h) = rows.first().map_or((1, 1), |s| (s.raw.width(), s.raw.height()));
    let mut sheet = ImageBuffer::new(3 * w, h * rows.len().max(1) as u32);
    for (r, s) in rows.iter().enumerate().filter(|(_, s)| s.raw.same_size(w, h)) {
        let codes = s.mask.codes();
        for v in 0..h {
            for u in 0..w {
                let y = r as u32 * h + v;
                let g = codes[(v * w + u) as usize];
                sheet.set(u, y, s.raw.get(u, v));
                sheet.set(w + u, y, s.condition.get(u, v));
                sheet.set(2 * w + u, y, [g, g, g]);
            }
        }
    }
    let contact_sheet = out.join("contact_sheet.ppm");
    netpbm::write_ppm(&contact_sheet, &sheet)?;
    Ok(ReportSummary {
        samples: dirs.len(),
        histogram,
        histogram_csv,
        contact_sheet,
    })
}
