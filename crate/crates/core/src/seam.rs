//! Pseudo-3D seam synthesis: fill masked pixels with a neighbouring camera's
//! view warped to the virtual pose, keeping whatever seams and exposure
//! differences that produces.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraCapture, CameraIntrinsics, CameraPose, Vec3};
use crate::image::ImageBuffer;
use crate::params::PipelineParams;
use crate::render::{render_shift_image, OcclusionMask, ShiftSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigCamera {
    pub name: String,
    pub intrinsics: CameraIntrinsics,
    pub cam2ego: CameraPose,
}

impl RigCamera {
    /// Heading of the optical axis (+z of the camera) in the ego frame,
    /// radians counter-clockwise from ego +x.
    pub fn yaw(&self) -> f64 {
        let axis = self.cam2ego.rotation() * Vec3::new(0.0, 0.0, 1.0);
        axis.y.atan2(axis.x)
    }
}

/// Ordered camera set. A camera's id is its index.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    cameras: Vec<RigCamera>,
}

impl CameraRig {
    pub fn new(cameras: Vec<RigCamera>) -> Result<Self> {
        if cameras.is_empty() {
            return Err(Error::invalid("camera rig is empty"));
        }
        if cameras.len() > usize::from(u16::MAX) {
            return Err(Error::invalid("too many cameras"));
        }
        for (i, c) in cameras.iter().enumerate() {
            if cameras[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::invalid(format!("duplicate camera id {:?}", c.name)));
            }
        }
        Ok(Self { cameras })
    }

    pub fn cameras(&self) -> &[RigCamera] {
        &self.cameras
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn camera(&self, id: u16) -> Result<&RigCamera> {
        self.cameras
            .get(usize::from(id))
            .ok_or_else(|| Error::invalid(format!("unknown camera id {id}")))
    }

    pub fn index_of(&self, name: &str) -> Result<u16> {
        self.cameras
            .iter()
            .position(|c| c.name == name)
            .map(|i| i as u16)
            .ok_or_else(|| Error::invalid(format!("unknown camera {name:?}")))
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Picks the camera whose heading is closest to the target's on the side the
/// virtual camera moves toward. For a forward-facing target a positive
/// (leftward) lateral shift selects larger yaw and a negative one smaller yaw;
/// the side flips for rear-facing targets (`lateral · cos(yaw)` decides).
/// Without a lateral component the nearest camera on either side wins, ties
/// going to positive yaw. `None` if no camera qualifies.
pub fn select_neighbor(rig: &CameraRig, target: u16, shift: &ShiftSpec) -> Result<Option<u16>> {
    let target_yaw = rig.camera(target)?.yaw();
    let toward = shift.lateral * target_yaw.cos();
    let side = if toward.abs() < 1e-9 {
        0.0
    } else {
        toward.signum()
    };
    let mut best: Option<(f64, bool, u16)> = None;
    for (i, cam) in rig.cameras().iter().enumerate() {
        let id = i as u16;
        if id == target {
            continue;
        }
        let delta = wrap_angle(cam.yaw() - target_yaw);
        if side != 0.0 && delta * side <= 0.0 {
            continue;
        }
        let dist = delta.abs();
        let positive = delta > 0.0;
        // closer first; then positive side; then rig order (first seen)
        let better = match best {
            None => true,
            Some((bd, bpos, _)) => dist < bd || (dist == bd && positive && !bpos),
        };
        if better {
            best = Some((dist, positive, id));
        }
    }
    Ok(best.map(|(_, _, id)| id))
}

/// Renders the neighbour's point cloud at `virt_pose` (virtual camera in the
/// parent frame of `ego_pose`). Holes stay black.
pub fn warp_neighbor(
    neighbor: &CameraCapture,
    ego_pose: &CameraPose,
    virt_pose: &CameraPose,
    target_intrinsics: &CameraIntrinsics,
    params: &PipelineParams,
) -> Result<ImageBuffer> {
    let cloud = neighbor.to_pointcloud(params.stride)?;
    let virt_in_ego = ego_pose.inverse().compose(virt_pose);
    Ok(render_shift_image(&cloud, &virt_in_ego, target_intrinsics, params).0)
}

/// `masked + warp ⊙ M`: masked pixels take the warp (black holes included),
/// visible pixels keep `masked`. No blending.
pub fn composite_seam(masked: &ImageBuffer, warp: &ImageBuffer, mask: &OcclusionMask) -> Result<ImageBuffer> {
    warp.ensure_size(masked.width(), masked.height(), "composite warp")?;
    mask.ensure_size(masked.width(), masked.height(), "composite")?;
    let mut out = masked.clone();
    for (i, flag) in mask.flags().iter().enumerate() {
        if flag.is_masked() {
            out.set_index(i, warp.get_index(i));
        }
    }
    Ok(out)
}
