use serde::{Deserialize, Serialize};

use super::Vec3;
use crate::error::{Error, Result};

/// Near-plane cutoff for projection, meters.
pub const DEFAULT_Z_MIN: f64 = 0.1;

/// Pinhole intrinsics. Pixel `(u, v)` with integer coordinates refers to the
/// pixel's center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntrinsicsRepr", into = "IntrinsicsRepr")]
pub struct CameraIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

#[derive(Serialize, Deserialize)]
struct IntrinsicsRepr {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let ok = fx.is_finite()
            && fy.is_finite()
            && fx > 0.0
            && fy > 0.0
            && width > 0
            && height > 0
            && cx >= -0.5
            && cx <= f64::from(width) - 0.5
            && cy >= -0.5
            && cy <= f64::from(height) - 0.5;
        if !ok {
            return Err(Error::invalid(format!(
                "intrinsics fx={fx} fy={fy} cx={cx} cy={cy} for {width}x{height} violate \
                 fx, fy > 0 and c within the pixel grid"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// `fx = fy = f`, principal point at the geometric image center.
    pub fn centered(f: f64, width: u32, height: u32) -> Result<Self> {
        Self::new(
            f,
            f,
            0.5 * f64::from(width) - 0.5,
            0.5 * f64::from(height) - 0.5,
            width,
            height,
        )
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }
    pub fn fy(&self) -> f64 {
        self.fy
    }
    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Camera-frame direction with unit z through pixel `(u, v)`: `K⁻¹ [u v 1]ᵀ`.
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

impl From<CameraIntrinsics> for IntrinsicsRepr {
    fn from(k: CameraIntrinsics) -> Self {
        IntrinsicsRepr {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
        }
    }
}

impl TryFrom<IntrinsicsRepr> for CameraIntrinsics {
    type Error = Error;

    fn try_from(r: IntrinsicsRepr) -> Result<Self> {
        CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

/// Lifts pixel `(u, v)` at metric `depth` into the camera frame.
pub fn backproject_pixel(pixel: (f64, f64), depth: f64, k: &CameraIntrinsics) -> Result<Vec3> {
    if !(depth.is_finite() && depth > 0.0) {
        return Err(Error::invalid(format!("depth {depth} must be finite and > 0")));
    }
    let (u, v) = pixel;
    if !(u >= 0.0 && u < f64::from(k.width) && v >= 0.0 && v < f64::from(k.height)) {
        return Err(Error::invalid(format!(
            "pixel ({u}, {v}) outside {}x{}",
            k.width, k.height
        )));
    }
    Ok(backproject_unchecked(u, v, depth, k))
}

#[inline]
pub(crate) fn backproject_unchecked(u: f64, v: f64, depth: f64, k: &CameraIntrinsics) -> Vec3 {
    Vec3::new(depth * (u - k.cx) / k.fx, depth * (v - k.cy) / k.fy, depth)
}

/// A point in front of the camera, in real-valued pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedPoint {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

impl ProjectedPoint {
    /// Nearest pixel center, rounding halves up on each axis independently.
    #[inline]
    pub fn rounded(&self) -> (i64, i64) {
        ((self.u + 0.5).floor() as i64, (self.v + 0.5).floor() as i64)
    }
}

/// Projects a camera-frame point. `None` means the point is behind the
/// camera or nearer than `z_min`.
#[inline]
pub fn project_point(p: &Vec3, k: &CameraIntrinsics, z_min: f64) -> Option<ProjectedPoint> {
    if p.z > z_min {
        Some(ProjectedPoint {
            u: k.fx * p.x / p.z + k.cx,
            v: k.fy * p.y / p.z + k.cy,
            depth: p.z,
        })
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k100() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap()
    }

    #[test]
    fn principal_ray_and_corner() {
        let k = k100();
        assert_eq!(backproject_pixel((50.0, 50.0), 10.0, &k).unwrap(), Vec3::new(0.0, 0.0, 10.0));
        assert_eq!(backproject_pixel((0.0, 0.0), 10.0, &k).unwrap(), Vec3::new(-5.0, -5.0, 10.0));
    }

    #[test]
    fn projection_examples() {
        let k = k100();
        let p = project_point(&Vec3::new(0.0, 0.0, 10.0), &k, DEFAULT_Z_MIN).unwrap();
        assert_eq!((p.u, p.v, p.depth), (50.0, 50.0, 10.0));
        let p = project_point(&Vec3::new(-5.0, -5.0, 10.0), &k, DEFAULT_Z_MIN).unwrap();
        assert_eq!((p.u, p.v, p.depth), (0.0, 0.0, 10.0));
        assert!(project_point(&Vec3::new(0.0, 0.0, -1.0), &k, DEFAULT_Z_MIN).is_none());
        assert!(project_point(&Vec3::new(0.0, 0.0, 0.1), &k, DEFAULT_Z_MIN).is_none());
    }

    #[test]
    fn backproject_rejects_bad_depth_and_pixel() {
        let k = k100();
        for d in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(backproject_pixel((1.0, 1.0), d, &k).is_err());
        }
        assert!(backproject_pixel((100.0, 1.0), 1.0, &k).is_err());
        assert!(backproject_pixel((-0.1, 1.0), 1.0, &k).is_err());
    }

    #[test]
    fn intrinsics_invariants() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, -0.6, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 1.0, 0.0, 4, 0).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 1, 1).is_ok());
        assert!(serde_json::from_str::<CameraIntrinsics>(
            r#"{"fx":-1,"fy":1,"cx":1,"cy":1,"width":4,"height":4}"#
        )
        .is_err());
    }

    #[test]
    fn round_trip_on_random_pixels() {
        let k = CameraIntrinsics::new(312.5, 287.25, 160.3, 119.7, 320, 240).unwrap();
        for i in 0..1000u64 {
            let u = crate::rng::uniform(11, i) * 320.0;
            let v = crate::rng::uniform(12, i) * 240.0;
            let d = DEFAULT_Z_MIN + crate::rng::uniform(13, i) * (1000.0 - DEFAULT_Z_MIN);
            let p = backproject_pixel((u, v), d, &k).unwrap();
            let q = project_point(&p, &k, DEFAULT_Z_MIN * 0.5).unwrap();
            assert!((q.u - u).abs() <= 1e-9 && (q.v - v).abs() <= 1e-9, "{u} {v} -> {q:?}");
            assert_eq!(q.depth, d);
        }
    }

    #[test]
    fn rounding_is_half_up() {
        let r = |u: f64, v: f64| ProjectedPoint { u, v, depth: 1.0 }.rounded();
        assert_eq!(r(2.5, -0.5), (3, 0));
        assert_eq!(r(2.4999, -0.5001), (2, -1));
    }
}
