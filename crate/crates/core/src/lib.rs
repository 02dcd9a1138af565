//! Virtual-shift inpainting data pipeline.
//!
//! Posed RGB images and depth maps are lifted into an ego-frame point cloud,
//! re-rendered from a laterally shifted virtual camera, and the pixels that
//! would be lost in that shift are carved out of the original image. The
//! holes are then filled with an (imperfect) warp from a neighbouring camera,
//! producing `(condition, raw)` training pairs whose supervision target is the
//! untouched recorded image.
//!
//! The [`flow`] module contains a deliberately tiny flow-matching inpainter
//! that trains on those pairs, and [`oracle`] provides procedurally generated
//! scenes with exact depth plus a brute-force renderer used to verify the
//! production renderer.

pub mod alloc;
pub mod dataset;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod image;
pub mod netpbm;
pub mod oracle;
pub mod params;
pub mod render;
pub mod rng;
pub mod seam;

pub use error::{Error, Result};
pub use geometry::{
    backproject_pixel, depth_to_pointcloud, project_point, CameraCapture, CameraIntrinsics,
    CameraPose, ColoredPoint, ColoredPointCloud, PointKey, ProjectedPoint, Vec3,
};
pub use image::{DepthMap, ImageBuffer};
pub use params::PipelineParams;
pub use render::{
    apply_mask, compute_occlusion_mask, make_virtual_pose, render_shift_image, MaskFlag,
    OcclusionMask, ShiftSpec, ZBuffer,
};
pub use seam::{composite_seam, select_neighbor, warp_neighbor, CameraRig, RigCamera};
