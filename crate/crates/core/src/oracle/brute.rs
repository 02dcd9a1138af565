use crate::geometry::{project_point, CameraIntrinsics, CameraPose, ColoredPointCloud, PointKey};
use crate::image::ImageBuffer;
use crate::params::PipelineParams;
use crate::render::{MaskFlag, OcclusionMask, ZBuffer};

struct Fragment {
    pixel: usize,
    depth: f64,
    key: PointKey,
    color: [u8; 3],
}

/// Reference renderer: emits every footprint fragment of every point, sorts
/// the full fragment list by `(pixel, depth, key)` and keeps the head of each
/// pixel's run. The mask is then read off the resulting depth image. No
/// incremental z-test and no spatial acceleration; intended for small scenes.
pub fn brute_force_render(
    cloud: &ColoredPointCloud,
    pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
    target_camera: u16,
    params: &PipelineParams,
) -> (ImageBuffer, ZBuffer, OcclusionMask) {
    let (w, h) = (i64::from(intrinsics.width()), i64::from(intrinsics.height()));
    let n = (w * h) as usize;
    let to_cam = pose.inverse();
    let r = i64::from(params.splat_radius);

    let mut fragments = Vec::new();
    for p in &cloud.points {
        if let Some(proj) = project_point(&to_cam.apply(&p.position), intrinsics, params.z_min) {
            let (cu, cv) = proj.rounded();
            for dv in -r..=r {
                for du in -r..=r {
                    let (pu, pv) = (cu + du, cv + dv);
                    if (0..w).contains(&pu) && (0..h).contains(&pv) {
                        fragments.push(Fragment {
                            pixel: (pv * w + pu) as usize,
                            depth: proj.depth,
                            key: p.key(),
                            color: p.color,
                        });
                    }
                }
            }
        }
    }
    fragments.sort_by(|a, b| {
        a.pixel
            .cmp(&b.pixel)
            .then(a.depth.total_cmp(&b.depth))
            .then(a.key.cmp(&b.key))
    });

    let mut image = ImageBuffer::new(w as u32, h as u32);
    let mut depth = vec![f64::INFINITY; n];
    let mut winner = vec![None; n];
    let mut last = usize::MAX;
    for f in &fragments {
        if f.pixel != last {
            last = f.pixel;
            depth[f.pixel] = f.depth;
            winner[f.pixel] = Some(f.key);
            image.set_index(f.pixel, f.color);
        }
    }

    let mut flags = vec![MaskFlag::InvalidDepth; n];
    for p in cloud.points.iter().filter(|p| p.source_camera == target_camera) {
        let flag = match project_point(&to_cam.apply(&p.position), intrinsics, params.z_min) {
            None => MaskFlag::OutOfView,
            Some(proj) => {
                let (cu, cv) = proj.rounded();
                if !((0..w).contains(&cu) && (0..h).contains(&cv)) {
                    MaskFlag::OutOfView
                } else {
                    let front = depth[(cv * w + cu) as usize];
                    if (proj.depth - front) / front > params.depth_tol {
                        MaskFlag::DepthOccluded
                    } else {
                        MaskFlag::Visible
                    }
                }
            }
        };
        let [su, sv] = p.source_pixel;
        flags[sv as usize * w as usize + su as usize] = flag;
    }
    let zbuffer = ZBuffer::from_parts(w as u32, h as u32, depth, winner);
    let mask = OcclusionMask::from_flags(w as u32, h as u32, flags).expect("sized above");
    (image, zbuffer, mask)
}

/// Width in pixels of the band a fronto-parallel plane at `plane_depth`
/// loses to a lateral shift: `round(fx·|s|/Z)`, at most `width`.
pub fn analytic_plane_band(fx: f64, plane_depth: f64, lateral: f64, width: u32) -> u32 {
    let disparity = fx * lateral.abs() / plane_depth;
    let band = (disparity + 0.5).floor();
    if band >= f64::from(width) {
        width
    } else {
        band as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ColoredPoint;
    use crate::Vec3;

    #[test]
    fn empty_cloud_renders_nothing() {
        let k = CameraIntrinsics::centered(10.0, 8, 6).unwrap();
        let (img, zb, mask) = brute_force_render(
            &ColoredPointCloud::default(),
            &CameraPose::identity(),
            &k,
            0,
            &PipelineParams::default(),
        );
        assert_eq!(img, ImageBuffer::new(8, 6));
        assert_eq!(zb, ZBuffer::empty(8, 6));
        assert_eq!(mask.count(MaskFlag::InvalidDepth), 48);
    }

    #[test]
    fn band_formula() {
        assert_eq!(analytic_plane_band(100.0, 10.0, 1.0, 100), 10);
        assert_eq!(analytic_plane_band(100.0, 10.0, -1.0, 100), 10);
        assert_eq!(analytic_plane_band(100.0, 10.0, 0.0, 100), 0);
        assert_eq!(analytic_plane_band(100.0, 2.0, 4.0, 100), 100);
        assert_eq!(analytic_plane_band(64.0, 12.0, 0.5, 64), 3); // 2.667
    }

    #[test]
    fn order_independent() {
        let k = CameraIntrinsics::centered(10.0, 8, 8).unwrap();
        let pts: Vec<_> = (0..20u32)
            .map(|i| ColoredPoint {
                position: Vec3::new(0.1 * f64::from(i % 5) - 0.2, 0.0, 2.0 + f64::from(i % 3)),
                color: [i as u8, 0, 0],
                source_pixel: [i % 8, i / 8],
                source_camera: (i % 2) as u16,
            })
            .collect();
        let mut rev = pts.clone();
        rev.reverse();
        let a = brute_force_render(&ColoredPointCloud { points: pts }, &CameraPose::identity(), &k, 0, &PipelineParams::default());
        let b = brute_force_render(&ColoredPointCloud { points: rev }, &CameraPose::identity(), &k, 0, &PipelineParams::default());
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);
    }
}
