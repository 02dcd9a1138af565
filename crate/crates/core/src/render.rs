//! Virtual-shift rendering: z-buffered point splatting into a shifted
//! virtual camera, the per-source-pixel occlusion mask, and masking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project_point, CameraIntrinsics, CameraPose, ColoredPointCloud, PointKey, Vec3};
use crate::image::ImageBuffer;
use crate::params::PipelineParams;

/// Offset of the virtual ego pose, expressed in the ego frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShiftSpec {
    /// Meters along ego +y (positive = left).
    pub lateral: f64,
    /// Meters along ego +x.
    pub longitudinal: f64,
    /// Meters along ego +z.
    pub vertical: f64,
    /// Radians about ego +z.
    pub yaw: f64,
}

impl ShiftSpec {
    pub fn lateral(meters: f64) -> Self {
        Self {
            lateral: meters,
            ..Self::default()
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }

    pub fn validate(&self, bound: f64) -> Result<()> {
        let all_finite = [self.lateral, self.longitudinal, self.vertical, self.yaw]
            .iter()
            .all(|x| x.is_finite());
        if !all_finite {
            return Err(Error::invalid(format!("non-finite shift {self:?}")));
        }
        if self.lateral.abs() > bound || self.longitudinal.abs() > bound {
            return Err(Error::invalid(format!(
                "shift {self:?} exceeds the {bound} m bound"
            )));
        }
        Ok(())
    }

    /// The shift as a rigid transform of the ego frame.
    pub fn as_pose(&self) -> CameraPose {
        CameraPose::from_yaw(
            Vec3::new(self.longitudinal, self.lateral, self.vertical),
            self.yaw,
        )
    }
}

/// `ego_pose ∘ shift`: the virtual ego pose in the same parent frame.
pub fn make_virtual_pose(ego_pose: &CameraPose, shift: &ShiftSpec, bound: f64) -> Result<CameraPose> {
    shift.validate(bound)?;
    Ok(ego_pose.compose(&shift.as_pose()))
}

/// Nearest depth and winning point per pixel. Empty pixels hold
/// `f64::INFINITY` and no winner.
#[derive(Debug, Clone, PartialEq)]
pub struct ZBuffer {
    width: u32,
    height: u32,
    depth: Vec<f64>,
    winner: Vec<Option<PointKey>>,
}

impl ZBuffer {
    pub fn empty(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            depth: vec![f64::INFINITY; n],
            winner: vec![None; n],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn depth_at(&self, i: usize) -> Option<f64> {
        self.winner[i].map(|_| self.depth[i])
    }

    #[inline]
    pub fn winner_at(&self, i: usize) -> Option<PointKey> {
        self.winner[i]
    }

    pub fn is_empty_at(&self, i: usize) -> bool {
        self.winner[i].is_none()
    }

    pub fn filled_count(&self) -> usize {
        self.winner.iter().filter(|w| w.is_some()).count()
    }

    /// Depth test with key tie-break. Returns whether the fragment won.
    #[inline]
    fn offer(&mut self, i: usize, depth: f64, key: PointKey) -> bool {
        let wins = match self.winner[i] {
            None => true,
            Some(k) => depth < self.depth[i] || (depth == self.depth[i] && key < k),
        };
        if wins {
            self.depth[i] = depth;
            self.winner[i] = Some(key);
        }
        wins
    }

    pub(crate) fn from_parts(width: u32, height: u32, depth: Vec<f64>, winner: Vec<Option<PointKey>>) -> Self {
        Self {
            width,
            height,
            depth,
            winner,
        }
    }
}

/// Renders `cloud` into the virtual camera whose pose in the cloud's frame is
/// `virt_pose`. Each point covers a `(2r+1)²` square around its rounded
/// projection; nearest depth wins, ties go to the smaller [`PointKey`].
/// Uncovered pixels stay black.
pub fn render_shift_image(
    cloud: &ColoredPointCloud,
    virt_pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
    params: &PipelineParams,
) -> (ImageBuffer, ZBuffer) {
    let (w, h) = (intrinsics.width(), intrinsics.height());
    let mut image = ImageBuffer::new(w, h);
    let mut zbuf = ZBuffer::empty(w, h);
    let cam_from_cloud = virt_pose.inverse();
    let r = i64::from(params.splat_radius);

    for point in &cloud.points {
        let Some(proj) = project_point(&cam_from_cloud.apply(&point.position), intrinsics, params.z_min) else {
            continue;
        };
        let (cu, cv) = proj.rounded();
        let key = point.key();
        for pv in (cv - r).max(0)..=(cv + r).min(i64::from(h) - 1) {
            for pu in (cu - r).max(0)..=(cu + r).min(i64::from(w) - 1) {
                let i = pv as usize * w as usize + pu as usize;
                if zbuf.offer(i, proj.depth, key) {
                    image.set_index(i, point.color);
                }
            }
        }
    }
    (image, zbuf)
}

/// Why a source pixel is (or is not) part of the mask `M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskFlag {
    Visible,
    OutOfView,
    DepthOccluded,
    InvalidDepth,
}

impl MaskFlag {
    /// Gray level used in persisted masks.
    pub fn code(self) -> u8 {
        match self {
            MaskFlag::Visible => 0,
            MaskFlag::InvalidDepth => 64,
            MaskFlag::DepthOccluded => 128,
            MaskFlag::OutOfView => 255,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(MaskFlag::Visible),
            64 => Some(MaskFlag::InvalidDepth),
            128 => Some(MaskFlag::DepthOccluded),
            255 => Some(MaskFlag::OutOfView),
            _ => None,
        }
    }

    pub fn is_masked(self) -> bool {
        self != MaskFlag::Visible
    }
}

/// Per-pixel [`MaskFlag`] on the source image grid. The binary mask is
/// `flag != Visible`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OcclusionMask {
    width: u32,
    height: u32,
    flags: Vec<MaskFlag>,
}

impl OcclusionMask {
    pub fn filled(width: u32, height: u32, flag: MaskFlag) -> Self {
        Self {
            width,
            height,
            flags: vec![flag; width as usize * height as usize],
        }
    }

    pub fn from_flags(width: u32, height: u32, flags: Vec<MaskFlag>) -> Result<Self> {
        if flags.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "mask {width}x{height} needs {} flags, got {}",
                width as usize * height as usize,
                flags.len()
            )));
        }
        Ok(Self {
            width,
            height,
            flags,
        })
    }

    pub fn from_codes(width: u32, height: u32, codes: &[u8]) -> Result<Self> {
        let flags = codes
            .iter()
            .map(|&c| MaskFlag::from_code(c).ok_or_else(|| Error::invalid(format!("unknown mask code {c}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_flags(width, height, flags)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn flags(&self) -> &[MaskFlag] {
        &self.flags
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> MaskFlag {
        self.flags[v as usize * self.width as usize + u as usize]
    }

    #[inline]
    pub fn is_masked_index(&self, i: usize) -> bool {
        self.flags[i].is_masked()
    }

    pub fn codes(&self) -> Vec<u8> {
        self.flags.iter().map(|f| f.code()).collect()
    }

    pub fn count(&self, flag: MaskFlag) -> usize {
        self.flags.iter().filter(|&&f| f == flag).count()
    }

    pub fn masked_count(&self) -> usize {
        self.flags.iter().filter(|f| f.is_masked()).count()
    }

    pub fn masked_fraction(&self) -> f64 {
        self.masked_count() as f64 / self.flags.len().max(1) as f64
    }

    pub(crate) fn ensure_size(&self, width: u32, height: u32, what: &str) -> Result<()> {
        if self.width == width && self.height == height {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{what}: mask is {}x{}, image is {width}x{height}",
                self.width, self.height
            )))
        }
    }
}

/// Flags every source pixel of `target_camera`: out of view when its virtual
/// projection misses the image or falls behind the near plane, depth-occluded
/// when it lies more than `depth_tol` (relative) behind the z-buffer at its
/// projected pixel, visible otherwise. Pixels without a point are
/// `InvalidDepth`. Points from other cameras only contribute via `zbuffer`.
pub fn compute_occlusion_mask(
    cloud: &ColoredPointCloud,
    virt_pose: &CameraPose,
    intrinsics: &CameraIntrinsics,
    zbuffer: &ZBuffer,
    target_camera: u16,
    params: &PipelineParams,
) -> Result<OcclusionMask> {
    let (w, h) = (intrinsics.width(), intrinsics.height());
    if zbuffer.width() != w || zbuffer.height() != h {
        return Err(Error::invalid(format!(
            "z-buffer is {}x{}, intrinsics are {w}x{h}",
            zbuffer.width(),
            zbuffer.height()
        )));
    }
    let mut mask = OcclusionMask::filled(w, h, MaskFlag::InvalidDepth);
    let cam_from_cloud = virt_pose.inverse();
    for point in cloud.points.iter().filter(|p| p.source_camera == target_camera) {
        let [su, sv] = point.source_pixel;
        if su >= w || sv >= h {
            return Err(Error::invalid(format!(
                "point source pixel ({su}, {sv}) outside the {w}x{h} target image"
            )));
        }
        let flag = match project_point(&cam_from_cloud.apply(&point.position), intrinsics, params.z_min) {
            None => MaskFlag::OutOfView,
            Some(proj) => {
                let (cu, cv) = proj.rounded();
                if cu < 0 || cv < 0 || cu >= i64::from(w) || cv >= i64::from(h) {
                    MaskFlag::OutOfView
                } else {
                    let i = cv as usize * w as usize + cu as usize;
                    // The point's own center pixel is always filled by the render.
                    let front = zbuffer.depth_at(i).unwrap_or(f64::INFINITY);
                    if (proj.depth - front) / front > params.depth_tol {
                        MaskFlag::DepthOccluded
                    } else {
                        MaskFlag::Visible
                    }
                }
            }
        };
        mask.flags[sv as usize * w as usize + su as usize] = flag;
    }
    Ok(mask)
}

/// `raw ⊙ (1 − M)`: masked pixels become black.
pub fn apply_mask(raw: &ImageBuffer, mask: &OcclusionMask) -> Result<ImageBuffer> {
    mask.ensure_size(raw.width(), raw.height(), "apply_mask")?;
    let mut out = raw.clone();
    for (i, flag) in mask.flags().iter().enumerate() {
        if flag.is_masked() {
            out.set_index(i, [0, 0, 0]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ColoredPoint, CameraCapture};
    use crate::image::DepthMap;

    fn k(w: u32, h: u32) -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 0.5 * w as f64, 0.5 * h as f64, w, h).unwrap()
    }

    fn point(pos: [f64; 3], color: [u8; 3], pixel: [u32; 2]) -> ColoredPoint {
        ColoredPoint {
            position: Vec3::from(pos),
            color,
            source_pixel: pixel,
            source_camera: 0,
        }
    }

    fn textured_capture(w: u32, h: u32, depth: f64) -> CameraCapture {
        CameraCapture {
            camera: 0,
            intrinsics: k(w, h),
            cam2ego: CameraPose::identity(),
            image: ImageBuffer::from_fn(w, h, |u, v| [(u * 7) as u8, (v * 13) as u8, ((u + v) * 3) as u8]),
            depth: DepthMap::from_values(w, h, vec![depth; (w * h) as usize]).unwrap(),
        }
    }

    #[test]
    fn virtual_pose_examples() {
        let id = CameraPose::identity();
        let p = make_virtual_pose(&id, &ShiftSpec::default(), 8.0).unwrap();
        assert_eq!(p.matrix(), id.matrix());
        let p = make_virtual_pose(&id, &ShiftSpec::lateral(1.0), 8.0).unwrap();
        assert_eq!(p.translation(), Vec3::new(0.0, 1.0, 0.0));
        let back = make_virtual_pose(&p, &ShiftSpec::lateral(-1.0), 8.0).unwrap();
        let m = back.matrix();
        for (r, row) in m.iter().enumerate() {
            for (c, x) in row.iter().enumerate() {
                assert!((x - id.matrix()[r][c]).abs() <= 1e-9);
            }
        }
        assert!(make_virtual_pose(&id, &ShiftSpec::lateral(8.5), 8.0).is_err());
        assert!(make_virtual_pose(&id, &ShiftSpec::lateral(f64::NAN), 8.0).is_err());
    }

    #[test]
    fn nearer_point_wins() {
        let cloud = ColoredPointCloud {
            points: vec![point([0.0, 0.0, 7.0], [7, 7, 7], [0, 0]), point([0.0, 0.0, 5.0], [5, 5, 5], [1, 0])],
        };
        let kk = k(4, 4);
        let (img, zb) = render_shift_image(&cloud, &CameraPose::identity(), &kk, &PipelineParams::default());
        assert_eq!(img.get(2, 2), [5, 5, 5]);
        assert_eq!(zb.depth_at(2 * 4 + 2), Some(5.0));
        assert_eq!(zb.filled_count(), 1);
    }

    #[test]
    fn equal_depth_tie_goes_to_smaller_key() {
        let a = point([0.0, 0.0, 5.0], [1, 1, 1], [3, 0]);
        let b = point([0.0, 0.0, 5.0], [2, 2, 2], [0, 1]);
        let kk = k(4, 4);
        for pts in [vec![a, b], vec![b, a]] {
            let cloud = ColoredPointCloud { points: pts };
            let (img, zb) = render_shift_image(&cloud, &CameraPose::identity(), &kk, &PipelineParams::default());
            assert_eq!(img.get(2, 2), [1, 1, 1]);
            assert_eq!(zb.winner_at(10), Some(a.key()));
        }
    }

    #[test]
    fn splat_radius_covers_square() {
        let cloud = ColoredPointCloud {
            points: vec![point([0.0, 0.0, 5.0], [9, 9, 9], [0, 0])],
        };
        let params = PipelineParams {
            splat_radius: 1,
            ..Default::default()
        };
        let (_, zb) = render_shift_image(&cloud, &CameraPose::identity(), &k(8, 8), &params);
        assert_eq!(zb.filled_count(), 9);
        // clipped at the border
        let cloud = ColoredPointCloud {
            points: vec![point([-4.0 * 5.0 / 100.0, -4.0 * 5.0 / 100.0, 5.0], [9, 9, 9], [0, 0])],
        };
        let (_, zb) = render_shift_image(&cloud, &CameraPose::identity(), &k(8, 8), &params);
        assert_eq!(zb.filled_count(), 4);
    }

    #[test]
    fn zero_shift_reproduces_source() {
        let cap = textured_capture(16, 12, 10.0);
        let cloud = cap.to_pointcloud(1).unwrap();
        let params = PipelineParams::default();
        let (img, zb) = render_shift_image(&cloud, &cap.cam2ego, &cap.intrinsics, &params);
        assert_eq!(img, cap.image);
        let mask = compute_occlusion_mask(&cloud, &cap.cam2ego, &cap.intrinsics, &zb, 0, &params).unwrap();
        assert_eq!(mask.masked_count(), 0);
    }

    #[test]
    fn invalid_depth_pixels_are_flagged() {
        let mut cap = textured_capture(8, 8, 10.0);
        let mut vals = cap.depth.values().to_vec();
        vals[5] = 0.0;
        vals[17] = 0.0;
        cap.depth = DepthMap::from_values(8, 8, vals).unwrap();
        let cloud = cap.to_pointcloud(1).unwrap();
        let params = PipelineParams::default();
        let (_, zb) = render_shift_image(&cloud, &cap.cam2ego, &cap.intrinsics, &params);
        let mask = compute_occlusion_mask(&cloud, &cap.cam2ego, &cap.intrinsics, &zb, 0, &params).unwrap();
        assert_eq!(mask.count(MaskFlag::InvalidDepth), 2);
        assert_eq!(mask.masked_count(), 2);
    }

    #[test]
    fn lateral_camera_shift_carves_band() {
        // Identity cam2ego here, so a camera-frame +x shift of 1 m at Z = 10,
        // fx = 100 moves content 10 px left and loses the 10 leftmost columns.
        let cap = textured_capture(40, 8, 10.0);
        let cloud = cap.to_pointcloud(1).unwrap();
        let params = PipelineParams::default();
        let virt = CameraPose::from_translation(Vec3::new(1.0, 0.0, 0.0));
        let (img, zb) = render_shift_image(&cloud, &virt, &cap.intrinsics, &params);
        let mask = compute_occlusion_mask(&cloud, &virt, &cap.intrinsics, &zb, 0, &params).unwrap();
        assert_eq!(mask.count(MaskFlag::OutOfView), 10 * 8);
        for v in 0..8 {
            for u in 0..40 {
                let expect_masked = u < 10;
                assert_eq!(mask.get(u, v).is_masked(), expect_masked, "({u},{v})");
                if u < 30 {
                    assert_eq!(img.get(u, v), cap.image.get(u + 10, v));
                } else {
                    assert_eq!(img.get(u, v), [0, 0, 0]);
                }
            }
        }
    }

    #[test]
    fn occlusion_behind_near_point() {
        // A far point and a near point landing on the same virtual pixel.
        let cloud = ColoredPointCloud {
            points: vec![point([0.0, 0.0, 10.0], [1, 1, 1], [2, 2]), point([0.0, 0.0, 5.0], [2, 2, 2], [1, 1])],
        };
        let params = PipelineParams::default();
        let kk = k(4, 4);
        let (_, zb) = render_shift_image(&cloud, &CameraPose::identity(), &kk, &params);
        let mask = compute_occlusion_mask(&cloud, &CameraPose::identity(), &kk, &zb, 0, &params).unwrap();
        assert_eq!(mask.get(2, 2), MaskFlag::DepthOccluded);
        assert_eq!(mask.get(1, 1), MaskFlag::Visible);
        // within tolerance → still visible
        let cloud = ColoredPointCloud {
            points: vec![point([0.0, 0.0, 5.1], [1, 1, 1], [2, 2]), point([0.0, 0.0, 5.0], [2, 2, 2], [1, 1])],
        };
        let (_, zb) = render_shift_image(&cloud, &CameraPose::identity(), &kk, &params);
        let mask = compute_occlusion_mask(&cloud, &CameraPose::identity(), &kk, &zb, 0, &params).unwrap();
        assert_eq!(mask.get(2, 2), MaskFlag::Visible);
    }

    #[test]
    fn behind_camera_is_out_of_view() {
        let cloud = ColoredPointCloud {
            points: vec![point([0.0, 0.0, 0.05], [1, 1, 1], [0, 0])],
        };
        let params = PipelineParams::default();
        let kk = k(4, 4);
        let (_, zb) = render_shift_image(&cloud, &CameraPose::identity(), &kk, &params);
        assert_eq!(zb.filled_count(), 0);
        let mask = compute_occlusion_mask(&cloud, &CameraPose::identity(), &kk, &zb, 0, &params).unwrap();
        assert_eq!(mask.get(0, 0), MaskFlag::OutOfView);
    }

    #[test]
    fn other_cameras_do_not_enter_the_mask() {
        let mut other = point([0.0, 0.0, 5.0], [3, 3, 3], [0, 0]);
        other.source_camera = 1;
        let cloud = ColoredPointCloud { points: vec![other] };
        let params = PipelineParams::default();
        let kk = k(4, 4);
        let (_, zb) = render_shift_image(&cloud, &CameraPose::identity(), &kk, &params);
        let mask = compute_occlusion_mask(&cloud, &CameraPose::identity(), &kk, &zb, 0, &params).unwrap();
        assert_eq!(mask.count(MaskFlag::InvalidDepth), 16);
    }

    #[test]
    fn mismatched_zbuffer_rejected() {
        let cloud = ColoredPointCloud::default();
        let zb = ZBuffer::empty(3, 3);
        assert!(compute_occlusion_mask(&cloud, &CameraPose::identity(), &k(4, 4), &zb, 0, &PipelineParams::default()).is_err());
    }

    #[test]
    fn apply_mask_examples() {
        let raw = ImageBuffer::from_fn(4, 4, |u, v| [u as u8 + 1, v as u8 + 1, 9]);
        let visible = OcclusionMask::filled(4, 4, MaskFlag::Visible);
        assert_eq!(apply_mask(&raw, &visible).unwrap(), raw);
        let all = OcclusionMask::filled(4, 4, MaskFlag::OutOfView);
        assert_eq!(apply_mask(&raw, &all).unwrap(), ImageBuffer::new(4, 4));

        let flags = (0..16)
            .map(|i| if (i % 4 + i / 4) % 2 == 0 { MaskFlag::DepthOccluded } else { MaskFlag::Visible })
            .collect();
        let checker = OcclusionMask::from_flags(4, 4, flags).unwrap();
        let out = apply_mask(&raw, &checker).unwrap();
        let mut masked_sum = 0u32;
        for i in 0..16 {
            if checker.is_masked_index(i) {
                masked_sum += out.get_index(i).iter().map(|&c| u32::from(c)).sum::<u32>();
            } else {
                assert_eq!(out.get_index(i), raw.get_index(i));
            }
        }
        assert_eq!(masked_sum, 0);
        assert_eq!(apply_mask(&out, &checker).unwrap(), out);
        assert!(apply_mask(&ImageBuffer::new(3, 4), &checker).is_err());
    }

    #[test]
    fn mask_codes_round_trip() {
        for f in [MaskFlag::Visible, MaskFlag::OutOfView, MaskFlag::DepthOccluded, MaskFlag::InvalidDepth] {
            assert_eq!(MaskFlag::from_code(f.code()), Some(f));
        }
        assert_eq!(MaskFlag::from_code(7), None);
    }
}
