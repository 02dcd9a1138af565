//! Pinhole cameras, rigid transforms and depth back-projection.
//!
//! Camera frame: +x right, +y down, +z forward. Ego frame: +x forward,
//! +y left, +z up. A pose `T` maps coordinates of its own frame into its
//! parent frame (`cam2ego`, `ego2world`).

mod camera;
mod cloud;
mod pose;

pub use camera::{backproject_pixel, project_point, CameraIntrinsics, ProjectedPoint, DEFAULT_Z_MIN};
pub use cloud::{depth_to_pointcloud, CameraCapture, ColoredPoint, ColoredPointCloud, PointKey};
pub use pose::{CameraPose, PoseRepr, QUATERNION_TOLERANCE};

pub type Vec3 = nalgebra::Vector3<f64>;
