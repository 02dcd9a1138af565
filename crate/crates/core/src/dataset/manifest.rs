//! Scene manifest: a JSON document naming the camera rig, the per-frame ego
//! poses and the image/depth files of every camera.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "scene-0001",
//!   "depth_scale": 0.001,
//!   "rig": [
//!     { "name": "CAM_FRONT",
//!       "intrinsics": { "fx": 64, "fy": 64, "cx": 31.5, "cy": 31.5, "width": 64, "height": 64 },
//!       "cam2ego": { "translation": [0, 0, 1.5], "rotation": [0.5, -0.5, 0.5, -0.5] } }
//!   ],
//!   "frames": [
//!     { "timestamp": 0.0,
//!       "ego2world": { "translation": [0, 0, 0], "rotation": [1, 0, 0, 0] },
//!       "cameras": [ { "camera": "CAM_FRONT", "image": "frames/000000_CAM_FRONT.ppm",
//!                      "depth": "frames/000000_CAM_FRONT_depth.pgm" } ] }
//!   ]
//! }
//! ```
//!
//! Paths are relative to the manifest's directory. Images are binary PPM,
//! depths binary 16-bit PGM holding `meters / depth_scale` (0 = invalid).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::geometry::{CameraCapture, CameraIntrinsics, CameraPose, PoseRepr, Vec3};
use crate::image::DepthMap;
use crate::netpbm;
use crate::seam::{CameraRig, RigCamera};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    UnsupportedSchema { found: u32 },
    #[error("scene has no frames")]
    EmptyScene,
    #[error("camera rig is empty")]
    EmptyRig,
    #[error("camera {camera:?} listed twice in the rig")]
    DuplicateCamera { camera: String },
    #[error("camera {camera:?} has invalid intrinsics: {reason}")]
    BadIntrinsics { camera: String, reason: String },
    #[error("{location}: quaternion or translation invalid: {reason}")]
    BadPose { location: String, reason: String },
    #[error("depth_scale {0} must be finite and > 0")]
    BadDepthScale(f64),
    #[error("frame {frame}: timestamp {timestamp} is not finite")]
    BadTimestamp { frame: usize, timestamp: f64 },
    #[error("frame {frame}: timestamp {timestamp} does not increase past {previous}")]
    NonMonotoneTimestamp {
        frame: usize,
        timestamp: f64,
        previous: f64,
    },
    #[error("frame {frame}: no entry for camera {camera:?}")]
    MissingCamera { frame: usize, camera: String },
    #[error("frame {frame}: camera {camera:?} is not in the rig")]
    UnknownCamera { frame: usize, camera: String },
    #[error("frame {frame}: camera {camera:?} listed twice")]
    DuplicateFrameCamera { frame: usize, camera: String },
    #[error("frame {frame}, camera {camera:?}: file {} does not exist", path.display())]
    MissingFile {
        frame: usize,
        camera: String,
        path: PathBuf,
    },
}

/// On-disk form, also what the scene generator writes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestFile {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub depth_scale: f64,
    pub rig: Vec<RigCameraFile>,
    pub frames: Vec<FrameFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigCameraFile {
    pub name: String,
    pub intrinsics: IntrinsicsFile,
    pub cam2ego: PoseRepr,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicsFile {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameFile {
    pub timestamp: f64,
    pub ego2world: PoseRepr,
    pub cameras: Vec<FrameCameraFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameCameraFile {
    pub camera: String,
    pub image: PathBuf,
    pub depth: PathBuf,
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub timestamp: f64,
    pub ego2world: CameraPose,
    /// Indexed by camera id.
    pub images: Vec<PathBuf>,
    pub depths: Vec<PathBuf>,
}

/// A validated scene.
#[derive(Debug, Clone)]
pub struct SceneManifest {
    pub name: String,
    pub depth_scale: f64,
    pub rig: CameraRig,
    pub frames: Vec<Frame>,
    /// Directory the manifest was loaded from.
    pub root: PathBuf,
}

fn pose(repr: PoseRepr, location: impl FnOnce() -> String) -> Result<CameraPose, ManifestError> {
    CameraPose::new(Vec3::from(repr.translation), repr.rotation).map_err(|e| ManifestError::BadPose {
        location: location(),
        reason: e.to_string(),
    })
}

/// Reads and fully validates a manifest, including that every referenced
/// file exists.
pub fn load_manifest(path: &Path) -> Result<SceneManifest, ManifestError> {
    let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ManifestFile = serde_json::from_str(&text).map_err(|source| ManifestError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut manifest = validate(file, &root)?;
    if manifest.name.is_empty() {
        manifest.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scene".into());
    }
    Ok(manifest)
}

pub fn validate(file: ManifestFile, root: &Path) -> Result<SceneManifest, ManifestError> {
    if file.schema_version != SCHEMA_VERSION {
        return Err(ManifestError::UnsupportedSchema {
            found: file.schema_version,
        });
    }
    if !(file.depth_scale.is_finite() && file.depth_scale > 0.0) {
        return Err(ManifestError::BadDepthScale(file.depth_scale));
    }
    if file.rig.is_empty() {
        return Err(ManifestError::EmptyRig);
    }
    let mut cameras = Vec::with_capacity(file.rig.len());
    for cam in &file.rig {
        if cameras.iter().any(|c: &RigCamera| c.name == cam.name) {
            return Err(ManifestError::DuplicateCamera {
                camera: cam.name.clone(),
            });
        }
        let k = cam.intrinsics;
        let intrinsics = CameraIntrinsics::new(k.fx, k.fy, k.cx, k.cy, k.width, k.height).map_err(|e| {
            ManifestError::BadIntrinsics {
                camera: cam.name.clone(),
                reason: e.to_string(),
            }
        })?;
        cameras.push(RigCamera {
            name: cam.name.clone(),
            intrinsics,
            cam2ego: pose(cam.cam2ego, || format!("camera {:?} cam2ego", cam.name))?,
        });
    }
    let rig = CameraRig::new(cameras).map_err(|_| ManifestError::EmptyRig)?;

    if file.frames.is_empty() {
        return Err(ManifestError::EmptyScene);
    }
    let mut frames = Vec::with_capacity(file.frames.len());
    let mut previous: Option<f64> = None;
    for (fi, frame) in file.frames.iter().enumerate() {
        if !frame.timestamp.is_finite() {
            return Err(ManifestError::BadTimestamp {
                frame: fi,
                timestamp: frame.timestamp,
            });
        }
        if let Some(prev) = previous {
            if frame.timestamp <= prev {
                return Err(ManifestError::NonMonotoneTimestamp {
                    frame: fi,
                    timestamp: frame.timestamp,
                    previous: prev,
                });
            }
        }
        previous = Some(frame.timestamp);
        let ego2world = pose(frame.ego2world, || format!("frame {fi} ego2world"))?;

        let n = rig.len();
        let mut images: Vec<Option<PathBuf>> = vec![None; n];
        let mut depths: Vec<Option<PathBuf>> = vec![None; n];
        for entry in &frame.cameras {
            let id = rig
                .cameras()
                .iter()
                .position(|c| c.name == entry.camera)
                .ok_or_else(|| ManifestError::UnknownCamera {
                    frame: fi,
                    camera: entry.camera.clone(),
                })?;
            if images[id].is_some() {
                return Err(ManifestError::DuplicateFrameCamera {
                    frame: fi,
                    camera: entry.camera.clone(),
                });
            }
            for (rel, slot) in [(&entry.image, &mut images[id]), (&entry.depth, &mut depths[id])] {
                let full = root.join(rel);
                if !full.is_file() {
                    return Err(ManifestError::MissingFile {
                        frame: fi,
                        camera: entry.camera.clone(),
                        path: full,
                    });
                }
                *slot = Some(full);
            }
        }
        let mut img_paths = Vec::with_capacity(n);
        let mut depth_paths = Vec::with_capacity(n);
        for (id, (img, depth)) in images.into_iter().zip(depths).enumerate() {
            match (img, depth) {
                (Some(i), Some(d)) => {
                    img_paths.push(i);
                    depth_paths.push(d);
                }
                _ => {
                    return Err(ManifestError::MissingCamera {
                        frame: fi,
                        camera: rig.cameras()[id].name.clone(),
                    })
                }
            }
        }
        frames.push(Frame {
            timestamp: frame.timestamp,
            ego2world,
            images: img_paths,
            depths: depth_paths,
        });
    }
    Ok(SceneManifest {
        name: file.name,
        depth_scale: file.depth_scale,
        rig,
        frames,
        root: root.to_path_buf(),
    })
}

impl SceneManifest {
    pub fn frame(&self, index: usize) -> Result<&Frame> {
        self.frames
            .get(index)
            .ok_or_else(|| Error::invalid(format!("frame {index} out of range (scene has {})", self.frames.len())))
    }

    /// Reads one camera's image and depth for one frame.
    pub fn load_capture(&self, frame: usize, camera: u16) -> Result<CameraCapture> {
        let rig_cam = self.rig.camera(camera)?;
        let f = self.frame(frame)?;
        let (w, h) = (rig_cam.intrinsics.width(), rig_cam.intrinsics.height());
        let image_path = &f.images[usize::from(camera)];
        let image = netpbm::read_ppm(image_path)?;
        if !image.same_size(w, h) {
            return Err(Error::Format {
                path: image_path.clone(),
                reason: format!("image is {}x{}, intrinsics say {w}x{h}", image.width(), image.height()),
            });
        }
        let depth_path = &f.depths[usize::from(camera)];
        let (dw, dh, stored) = netpbm::read_pgm16(depth_path)?;
        if (dw, dh) != (w, h) {
            return Err(Error::Format {
                path: depth_path.clone(),
                reason: format!("depth is {dw}x{dh}, intrinsics say {w}x{h}"),
            });
        }
        let depth = DepthMap::from_quantized(w, h, &stored, self.depth_scale)?;
        Ok(CameraCapture {
            camera,
            intrinsics: rig_cam.intrinsics,
            cam2ego: rig_cam.cam2ego,
            image,
            depth,
        })
    }
}
