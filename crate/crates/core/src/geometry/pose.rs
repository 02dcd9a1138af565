use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::error::{Error, Result};

/// Maximum accepted deviation of a quaternion's norm from one.
pub const QUATERNION_TOLERANCE: f64 = 1e-6;

/// Rigid transform: rotate, then translate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct CameraPose {
    translation: Vec3,
    rotation: UnitQuaternion<f64>,
}

/// Plain serialized form: translation in meters, rotation as `[w, x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRepr {
    pub translation: [f64; 3],
    pub rotation: [f64; 4],
}

impl Default for CameraPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl CameraPose {
    pub fn identity() -> Self {
        Self {
            translation: Vec3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    /// Builds a pose from a `(w, x, y, z)` quaternion, which must already be
    /// unit length within [`QUATERNION_TOLERANCE`]; it is renormalized.
    pub fn new(translation: Vec3, wxyz: [f64; 4]) -> Result<Self> {
        if !translation.iter().all(|t| t.is_finite()) {
            return Err(Error::invalid(format!("non-finite translation {translation:?}")));
        }
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        let norm = q.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > QUATERNION_TOLERANCE {
            return Err(Error::invalid(format!(
                "quaternion {wxyz:?} has norm {norm}, not 1 within {QUATERNION_TOLERANCE}"
            )));
        }
        Ok(Self {
            translation,
            rotation: UnitQuaternion::new_normalize(q),
        })
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            translation,
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn from_parts(translation: Vec3, rotation: UnitQuaternion<f64>) -> Self {
        Self {
            translation,
            rotation,
        }
    }

    /// Rotation by `yaw` radians about +z, then translation.
    pub fn from_yaw(translation: Vec3, yaw: f64) -> Self {
        let half = 0.5 * yaw;
        Self::from_parts(
            translation,
            UnitQuaternion::new_unchecked(Quaternion::new(half.cos(), 0.0, 0.0, half.sin())),
        )
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        self.rotation
    }

    /// Rotation as `[w, x, y, z]`.
    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    #[inline]
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &CameraPose) -> CameraPose {
        let q = self.rotation.quaternion() * other.rotation.quaternion();
        CameraPose {
            translation: self.rotation * other.translation + self.translation,
            rotation: UnitQuaternion::new_normalize(q),
        }
    }

    pub fn inverse(&self) -> CameraPose {
        let inv = self.rotation.inverse();
        CameraPose {
            translation: -(inv * self.translation),
            rotation: inv,
        }
    }

    /// Homogeneous 4x4 matrix, row-major.
    pub fn matrix(&self) -> [[f64; 4]; 4] {
        let r = self.rotation.to_rotation_matrix();
        let m = r.matrix();
        let t = self.translation;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)], t.x],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)], t.y],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)], t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }
}

impl From<CameraPose> for PoseRepr {
    fn from(p: CameraPose) -> Self {
        PoseRepr {
            translation: [p.translation.x, p.translation.y, p.translation.z],
            rotation: p.quaternion_wxyz(),
        }
    }
}

impl TryFrom<PoseRepr> for CameraPose {
    type Error = Error;

    fn try_from(r: PoseRepr) -> Result<Self> {
        CameraPose::new(Vec3::from(r.translation), r.rotation)
    }
}
