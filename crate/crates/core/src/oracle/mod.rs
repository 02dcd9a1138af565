//! Ground-truth machinery: procedurally textured scenes with exact depth,
//! and an exhaustive reference renderer.

mod brute;
mod scene;

pub use brute::{analytic_plane_band, brute_force_render};
pub use scene::{
    base_camera_rotation, cam2ego_from_yaw, default_rig, gen_scene, render_ground_truth, Axis, Primitive, RigCameraSpec,
    SceneSpec, Texture, Waypoint,
};
