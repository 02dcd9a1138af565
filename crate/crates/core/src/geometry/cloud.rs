use super::camera::backproject_unchecked;
use super::{CameraIntrinsics, CameraPose, Vec3};
use crate::error::{Error, Result};
use crate::image::{DepthMap, ImageBuffer};

/// Canonical identity of a point: source row, source column, source camera.
/// Its ordering is the depth-test tie-break (smaller key wins), which makes
/// rendering independent of the order points are stored in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointKey {
    pub v: u32,
    pub u: u32,
    pub camera: u16,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColoredPoint {
    pub position: Vec3,
    pub color: [u8; 3],
    /// `(u, v)` in the source image.
    pub source_pixel: [u32; 2],
    pub source_camera: u16,
}

impl ColoredPoint {
    #[inline]
    pub fn key(&self) -> PointKey {
        PointKey {
            v: self.source_pixel[1],
            u: self.source_pixel[0],
            camera: self.source_camera,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColoredPointCloud {
    pub points: Vec<ColoredPoint>,
}

impl ColoredPointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn extend(&mut self, other: ColoredPointCloud) {
        self.points.extend(other.points);
    }
}

/// Lifts every valid depth pixel on the `stride` grid into the ego frame,
/// in row-major order.
pub fn depth_to_pointcloud(
    image: &ImageBuffer,
    depth: &DepthMap,
    intrinsics: &CameraIntrinsics,
    cam2ego: &CameraPose,
    stride: u32,
    camera: u16,
) -> Result<ColoredPointCloud> {
    let (w, h) = (intrinsics.width(), intrinsics.height());
    image.ensure_size(w, h, "point cloud image")?;
    if depth.width() != w || depth.height() != h {
        return Err(Error::invalid(format!(
            "point cloud depth: expected {w}x{h}, got {}x{}",
            depth.width(),
            depth.height()
        )));
    }
    if stride == 0 {
        return Err(Error::invalid("stride must be >= 1"));
    }
    let mut points = Vec::with_capacity(depth.valid_count());
    for v in (0..h).step_by(stride as usize) {
        for u in (0..w).step_by(stride as usize) {
            let d = depth.get(u, v);
            if d <= 0.0 {
                continue;
            }
            let p_cam = backproject_unchecked(f64::from(u), f64::from(v), d, intrinsics);
            points.push(ColoredPoint {
                position: cam2ego.apply(&p_cam),
                color: image.get(u, v),
                source_pixel: [u, v],
                source_camera: camera,
            });
        }
    }
    Ok(ColoredPointCloud { points })
}

/// One camera's observation at one instant: image, depth and calibration.
#[derive(Debug, Clone)]
pub struct CameraCapture {
    pub camera: u16,
    pub intrinsics: CameraIntrinsics,
    pub cam2ego: CameraPose,
    pub image: ImageBuffer,
    pub depth: DepthMap,
}

impl CameraCapture {
    pub fn to_pointcloud(&self, stride: u32) -> Result<ColoredPointCloud> {
        depth_to_pointcloud(
            &self.image,
            &self.depth,
            &self.intrinsics,
            &self.cam2ego,
            stride,
            self.camera,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(w: u32, h: u32) -> CameraIntrinsics {
        CameraIntrinsics::centered(2.0, w, h).unwrap()
    }

    #[test]
    fn counts_valid_pixels() {
        let img = ImageBuffer::new(2, 2);
        let depth = DepthMap::from_values(2, 2, vec![1.0; 4]).unwrap();
        let cloud = depth_to_pointcloud(&img, &depth, &k(2, 2), &CameraPose::identity(), 1, 0).unwrap();
        assert_eq!(cloud.len(), 4);

        let none = DepthMap::new(2, 2);
        let cloud = depth_to_pointcloud(&img, &none, &k(2, 2), &CameraPose::identity(), 1, 0).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn stride_grid_count() {
        let (w, h) = (7, 5);
        let img = ImageBuffer::new(w, h);
        let mut vals = vec![2.0; (w * h) as usize];
        vals[0] = 0.0;
        let depth = DepthMap::from_values(w, h, vals).unwrap();
        for stride in 1..5u32 {
            let grid = (0..h).step_by(stride as usize).count() * (0..w).step_by(stride as usize).count();
            let cloud = depth_to_pointcloud(&img, &depth, &k(w, h), &CameraPose::identity(), stride, 3).unwrap();
            assert_eq!(cloud.len(), grid - 1);
            assert!(cloud.points.iter().all(|p| p.source_pixel[0] % stride == 0 && p.source_camera == 3));
        }
    }

    #[test]
    fn copies_colors_and_applies_extrinsics() {
        let mut img = ImageBuffer::new(3, 1);
        img.set(2, 0, [9, 8, 7]);
        let depth = DepthMap::from_values(3, 1, vec![0.0, 0.0, 4.0]).unwrap();
        let pose = CameraPose::from_translation(Vec3::new(1.0, 0.0, 0.0));
        let cloud = depth_to_pointcloud(&img, &depth, &k(3, 1), &pose, 1, 0).unwrap();
        assert_eq!(cloud.points[0].color, [9, 8, 7]);
        assert_eq!(cloud.points[0].source_pixel, [2, 0]);
        // u = 2, cx = 1, fx = 2 → x = 4 * 1 / 2 = 2, then +1 translation
        assert_eq!(cloud.points[0].position, Vec3::new(3.0, 0.0, 4.0));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let img = ImageBuffer::new(3, 3);
        let depth = DepthMap::new(2, 2);
        assert!(depth_to_pointcloud(&img, &depth, &k(2, 2), &CameraPose::identity(), 1, 0).is_err());
        let img = ImageBuffer::new(2, 2);
        assert!(depth_to_pointcloud(&img, &depth, &k(2, 2), &CameraPose::identity(), 0, 0).is_err());
    }

    #[test]
    fn keys_order_row_major_then_camera() {
        let a = PointKey { v: 0, u: 5, camera: 1 };
        let b = PointKey { v: 1, u: 0, camera: 0 };
        let c = PointKey { v: 1, u: 0, camera: 2 };
        assert!(a < b && b < c);
    }
}
