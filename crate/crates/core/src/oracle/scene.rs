//! Procedural scenes: axis-aligned planes and boxes with analytic textures,
//! ray-cast per pixel for exact depth and color.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::dataset::manifest::{
    self, FrameCameraFile, FrameFile, IntrinsicsFile, ManifestFile, RigCameraFile, SceneManifest,
};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, CameraPose, PoseRepr, Vec3};
use crate::image::{DepthMap, ImageBuffer};
use crate::netpbm;
use crate::rng;
use crate::seam::{CameraRig, RigCamera};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// The two in-plane axes, in increasing order.
    fn others(self) -> (usize, usize) {
        match self {
            Axis::X => (1, 2),
            Axis::Y => (0, 2),
            Axis::Z => (0, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Texture {
    Solid { color: [u8; 3] },
    /// Squares of side `period` meters in the surface's two in-plane axes.
    Checker { period: f64, colors: [[u8; 3]; 2] },
    /// Bilinear value noise on a lattice of `cell` meters, seeded by the
    /// scene seed and the primitive's index.
    Noise { cell: f64, colors: [[u8; 3]; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    /// The plane `coord[axis] = offset` in world coordinates, optionally
    /// limited to `bounds` over the two remaining axes (in x, y, z order).
    /// With the default `axis = x` the plane faces a forward-looking camera.
    Plane {
        #[serde(default = "default_axis")]
        axis: Axis,
        offset: f64,
        #[serde(default)]
        bounds: Option<[[f64; 2]; 2]>,
        texture: Texture,
    },
    Box {
        min: [f64; 3],
        max: [f64; 3],
        texture: Texture,
    },
}

fn default_axis() -> Axis {
    Axis::X
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigCameraSpec {
    pub name: String,
    /// Optical-axis heading in the ego frame, degrees, counter-clockwise.
    pub yaw_deg: f64,
    #[serde(default)]
    pub translation: [f64; 3],
    /// Multiplicative exposure applied to rendered colors.
    #[serde(default = "one")]
    pub gain: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub width: u32,
    pub height: u32,
    /// Focal length in pixels; defaults to the image width (~53° FOV).
    #[serde(default)]
    pub focal: Option<f64>,
    #[serde(default = "default_rig")]
    pub rig: Vec<RigCameraSpec>,
    pub primitives: Vec<Primitive>,
    pub trajectory: Vec<Waypoint>,
    #[serde(default = "default_interval")]
    pub frame_interval: f64,
    #[serde(default = "default_depth_scale")]
    pub depth_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_name() -> String {
    "synthetic".into()
}

fn default_interval() -> f64 {
    0.1
}

fn default_depth_scale() -> f64 {
    0.001
}

/// Three cameras at yaw −30°, 0°, +30°.
pub fn default_rig() -> Vec<RigCameraSpec> {
    [("CAM_FRONT_RIGHT", -30.0), ("CAM_FRONT", 0.0), ("CAM_FRONT_LEFT", 30.0)]
        .into_iter()
        .map(|(name, yaw_deg)| RigCameraSpec {
            name: name.into(),
            yaw_deg,
            translation: [0.0; 3],
            gain: 1.0,
        })
        .collect()
}

/// Rotation taking camera axes (x right, y down, z forward) onto ego axes
/// (x forward, y left, z up) for a camera looking along ego +x.
pub fn base_camera_rotation() -> CameraPose {
    CameraPose::new(Vec3::zeros(), [0.5, -0.5, 0.5, -0.5]).expect("unit quaternion")
}

pub fn cam2ego_from_yaw(translation: Vec3, yaw_deg: f64) -> CameraPose {
    CameraPose::from_yaw(translation, yaw_deg.to_radians()).compose(&base_camera_rotation())
}

fn texture_ok(t: &Texture) -> bool {
    match t {
        Texture::Solid { .. } => true,
        Texture::Checker { period, .. } => period.is_finite() && *period > 0.0,
        Texture::Noise { cell, .. } => cell.is_finite() && *cell > 0.0,
    }
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SceneSpec = serde_json::from_str(text).map_err(|source| Error::Json {
            path: PathBuf::from("<scene spec>"),
            source,
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("scene image size must be positive"));
        }
        if self.trajectory.is_empty() {
            return Err(Error::invalid("scene trajectory is empty"));
        }
        if self.rig.is_empty() {
            return Err(Error::invalid("scene rig is empty"));
        }
        if !(self.frame_interval.is_finite() && self.frame_interval > 0.0) {
            return Err(Error::invalid("frame_interval must be > 0"));
        }
        if !(self.depth_scale.is_finite() && self.depth_scale > 0.0) {
            return Err(Error::invalid("depth_scale must be > 0"));
        }
        for (i, p) in self.primitives.iter().enumerate() {
            let ok = match p {
                Primitive::Plane {
                    offset, bounds, texture, ..
                } => {
                    offset.is_finite()
                        && bounds.is_none_or(|b| b.iter().all(|r| r[0].is_finite() && r[1].is_finite() && r[0] < r[1]))
                        && texture_ok(texture)
                }
                Primitive::Box { min, max, texture } => {
                    (0..3).all(|a| min[a].is_finite() && max[a].is_finite() && min[a] < max[a]) && texture_ok(texture)
                }
            };
            if !ok {
                return Err(Error::invalid(format!("primitive {i} is degenerate: {p:?}")));
            }
        }
        self.rig()?;
        Ok(())
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        let f = self.focal.unwrap_or(f64::from(self.width));
        CameraIntrinsics::centered(f, self.width, self.height)
    }

    pub fn rig(&self) -> Result<CameraRig> {
        let k = self.intrinsics()?;
        CameraRig::new(
            self.rig
                .iter()
                .map(|c| RigCamera {
                    name: c.name.clone(),
                    intrinsics: k,
                    cam2ego: cam2ego_from_yaw(Vec3::from(c.translation), c.yaw_deg),
                })
                .collect(),
        )
    }

    pub fn ego2world(&self, frame: usize) -> Result<CameraPose> {
        let wp = self
            .trajectory
            .get(frame)
            .ok_or_else(|| Error::invalid(format!("frame {frame} outside trajectory")))?;
        Ok(CameraPose::from_yaw(Vec3::from(wp.position), wp.yaw_deg.to_radians()))
    }
}

struct Hit {
    t: f64,
    point: Vec3,
    /// Axis of the surface normal.
    axis: Axis,
    primitive: usize,
}

fn intersect(prim: &Primitive, index: usize, origin: &Vec3, dir: &Vec3) -> Option<Hit> {
    const EPS: f64 = 1e-12;
    match prim {
        Primitive::Plane {
            axis, offset, bounds, ..
        } => {
            let a = axis.index();
            if dir[a].abs() < EPS {
                return None;
            }
            let t = (offset - origin[a]) / dir[a];
            if t <= EPS {
                return None;
            }
            let point = origin + dir * t;
            if let Some(b) = bounds {
                let (i, j) = axis.others();
                if point[i] < b[0][0] || point[i] > b[0][1] || point[j] < b[1][0] || point[j] > b[1][1] {
                    return None;
                }
            }
            Some(Hit {
                t,
                point,
                axis: *axis,
                primitive: index,
            })
        }
        Primitive::Box { min, max, .. } => {
            let mut t_near = f64::NEG_INFINITY;
            let mut t_far = f64::INFINITY;
            let mut near_axis = 0;
            for a in 0..3 {
                if dir[a].abs() < EPS {
                    if origin[a] < min[a] || origin[a] > max[a] {
                        return None;
                    }
                    continue;
                }
                let (t0, t1) = {
                    let t0 = (min[a] - origin[a]) / dir[a];
                    let t1 = (max[a] - origin[a]) / dir[a];
                    if t0 < t1 {
                        (t0, t1)
                    } else {
                        (t1, t0)
                    }
                };
                if t0 > t_near {
                    t_near = t0;
                    near_axis = a;
                }
                t_far = t_far.min(t1);
            }
            if t_near > t_far || t_near <= EPS {
                return None;
            }
            let axis = [Axis::X, Axis::Y, Axis::Z][near_axis];
            Some(Hit {
                t: t_near,
                point: origin + dir * t_near,
                axis,
                primitive: index,
            })
        }
    }
}

fn lerp_color(colors: &[[u8; 3]; 2], w: f64) -> [f64; 3] {
    std::array::from_fn(|c| f64::from(colors[0][c]) + (f64::from(colors[1][c]) - f64::from(colors[0][c])) * w)
}

fn value_noise(key: u64, x: f64, y: f64) -> f64 {
    let (ix, iy) = (x.floor(), y.floor());
    let (fx, fy) = (x - ix, y - iy);
    let lattice = |i: f64, j: f64| rng::uniform(rng::mix(key, i as i64 as u64), j as i64 as u64);
    let fade = |t: f64| t * t * (3.0 - 2.0 * t);
    let (sx, sy) = (fade(fx), fade(fy));
    let top = lattice(ix, iy) * (1.0 - sx) + lattice(ix + 1.0, iy) * sx;
    let bottom = lattice(ix, iy + 1.0) * (1.0 - sx) + lattice(ix + 1.0, iy + 1.0) * sx;
    top * (1.0 - sy) + bottom * sy
}

fn shade(spec: &SceneSpec, hit: &Hit, gain: f64) -> [u8; 3] {
    let texture = match &spec.primitives[hit.primitive] {
        Primitive::Plane { texture, .. } | Primitive::Box { texture, .. } => texture,
    };
    let (i, j) = hit.axis.others();
    let (s, t) = (hit.point[i], hit.point[j]);
    let rgb = match texture {
        Texture::Solid { color } => color.map(f64::from),
        Texture::Checker { period, colors } => {
            let parity = ((s / period).floor() + (t / period).floor()).rem_euclid(2.0);
            colors[parity as usize].map(f64::from)
        }
        Texture::Noise { cell, colors } => {
            let key = rng::derive(spec.seed, hit.primitive as u64 * 4 + hit.axis.index() as u64);
            lerp_color(colors, value_noise(key, s / cell, t / cell))
        }
    };
    rgb.map(|c| (c * gain + 0.5).floor().clamp(0.0, 255.0) as u8)
}

/// Exact color and depth (meters along camera +z, 0 where the ray escapes)
/// for one camera at one frame.
pub fn render_ground_truth(spec: &SceneSpec, frame: usize, camera: usize) -> Result<(ImageBuffer, DepthMap)> {
    let cam_spec = spec
        .rig
        .get(camera)
        .ok_or_else(|| Error::invalid(format!("camera {camera} not in scene rig")))?;
    let k = spec.intrinsics()?;
    let cam2world = spec
        .ego2world(frame)?
        .compose(&cam2ego_from_yaw(Vec3::from(cam_spec.translation), cam_spec.yaw_deg));
    let origin = cam2world.translation();
    let rot: Matrix3<f64> = *cam2world.rotation().to_rotation_matrix().matrix();

    for (i, p) in spec.primitives.iter().enumerate() {
        if let Primitive::Box { min, max, .. } = p {
            if (0..3).all(|a| origin[a] > min[a] && origin[a] < max[a]) {
                return Err(Error::DegenerateView(format!(
                    "camera {:?} at frame {frame} is inside box primitive {i}",
                    cam_spec.name
                )));
            }
        }
    }

    let (w, h) = (spec.width, spec.height);
    let mut image = ImageBuffer::new(w, h);
    let mut depth = vec![0.0; w as usize * h as usize];
    for v in 0..h {
        for u in 0..w {
            let dir = rot * k.ray(f64::from(u), f64::from(v));
            let nearest = spec
                .primitives
                .iter()
                .enumerate()
                .filter_map(|(i, p)| intersect(p, i, &origin, &dir))
                .min_by(|a, b| a.t.total_cmp(&b.t));
            if let Some(hit) = nearest {
                image.set(u, v, shade(spec, &hit, cam_spec.gain));
                // `dir` has unit camera-z, so the ray parameter is the depth.
                depth[v as usize * w as usize + u as usize] = hit.t;
            }
        }
    }
    Ok((image, DepthMap::from_values(w, h, depth)?))
}

fn frame_file_stem(frame: usize, camera: &str) -> String {
    format!("{frame:06}_{camera}")
}

/// Renders every frame and camera of `spec` into `out_dir` (PPM images,
/// 16-bit PGM depths, `manifest.json`) and returns the loaded manifest.
pub fn gen_scene(spec: &SceneSpec, out_dir: &Path) -> Result<SceneManifest> {
    spec.validate()?;
    let frames_dir = out_dir.join("frames");
    fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    let rig = spec.rig()?;
    let k = spec.intrinsics()?;

    let mut frames = Vec::with_capacity(spec.trajectory.len());
    for f in 0..spec.trajectory.len() {
        let mut cameras = Vec::with_capacity(rig.len());
        for (c, cam) in rig.cameras().iter().enumerate() {
            let (image, depth) = render_ground_truth(spec, f, c)?;
            let stem = frame_file_stem(f, &cam.name);
            let image_rel = PathBuf::from("frames").join(format!("{stem}.ppm"));
            let depth_rel = PathBuf::from("frames").join(format!("{stem}_depth.pgm"));
            netpbm::write_ppm(&out_dir.join(&image_rel), &image)?;
            netpbm::write_pgm16(&out_dir.join(&depth_rel), k.width(), k.height(), &depth.quantize(spec.depth_scale))?;
            cameras.push(FrameCameraFile {
                camera: cam.name.clone(),
                image: image_rel,
                depth: depth_rel,
            });
        }
        frames.push(FrameFile {
            timestamp: f as f64 * spec.frame_interval,
            ego2world: PoseRepr::from(spec.ego2world(f)?),
            cameras,
        });
    }
    let file = ManifestFile {
        schema_version: manifest::SCHEMA_VERSION,
        name: spec.name.clone(),
        depth_scale: spec.depth_scale,
        rig: rig
            .cameras()
            .iter()
            .map(|c| RigCameraFile {
                name: c.name.clone(),
                intrinsics: IntrinsicsFile {
                    fx: c.intrinsics.fx(),
                    fy: c.intrinsics.fy(),
                    cx: c.intrinsics.cx(),
                    cy: c.intrinsics.cy(),
                    width: c.intrinsics.width(),
                    height: c.intrinsics.height(),
                },
                cam2ego: PoseRepr::from(c.cam2ego),
            })
            .collect(),
        frames,
    };
    let path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&file).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest::load_manifest(&path)?)
}
