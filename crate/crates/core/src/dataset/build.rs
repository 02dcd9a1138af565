use std::path::PathBuf;
use std::time::{Duration, Instant};

use crate::alloc;
use crate::dataset::sample_io::{sample_dir_name, write_sample};
use crate::dataset::{SceneManifest, ShiftSampler};
use crate::error::{Error, Result};
use crate::geometry::{CameraCapture, CameraPose};
use crate::image::ImageBuffer;
use crate::params::PipelineParams;
use crate::render::{
    apply_mask, compute_occlusion_mask, make_virtual_pose, render_shift_image, OcclusionMask, ShiftSpec, ZBuffer,
};
use crate::seam::{composite_seam, select_neighbor, warp_neighbor};

pub const HISTOGRAM_BINS: usize = 10;

/// One training pair: `condition` is what the network sees, `raw` the
/// supervision target.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSample {
    pub raw: ImageBuffer,
    pub condition: ImageBuffer,
    pub mask: OcclusionMask,
    pub shift: ShiftSpec,
    pub frame: usize,
    pub camera: u16,
    pub camera_name: String,
    pub neighbor: Option<u16>,
    pub neighbor_name: Option<String>,
    pub params: PipelineParams,
}

/// Every intermediate image of one condition build.
#[derive(Debug, Clone)]
pub struct ConditionProducts {
    pub raw: ImageBuffer,
    pub shifted: ImageBuffer,
    pub zbuffer: ZBuffer,
    pub mask: OcclusionMask,
    pub masked: ImageBuffer,
    /// Black where the neighbour does not reach, or everywhere without one.
    pub warp: ImageBuffer,
    pub neighbor: Option<u16>,
    pub condition: ImageBuffer,
}

/// Captures of the current frame, loaded on first use and dropped with the
/// frame.
struct FrameCache<'a> {
    scene: &'a SceneManifest,
    frame: usize,
    captures: Vec<Option<CameraCapture>>,
}

impl<'a> FrameCache<'a> {
    fn new(scene: &'a SceneManifest, frame: usize) -> Result<Self> {
        scene.frame(frame)?;
        Ok(Self {
            scene,
            frame,
            captures: vec![None; scene.rig.len()],
        })
    }

    fn load(&mut self, camera: u16) -> Result<()> {
        let slot = self
            .captures
            .get_mut(usize::from(camera))
            .ok_or_else(|| Error::invalid(format!("camera {camera} not in rig")))?;
        if slot.is_none() {
            *slot = Some(self.scene.load_capture(self.frame, camera)?);
        }
        Ok(())
    }

    fn get(&self, camera: u16) -> &CameraCapture {
        self.captures[usize::from(camera)].as_ref().expect("capture loaded")
    }
}

fn products_with(cache: &mut FrameCache, camera: u16, shift: &ShiftSpec, params: &PipelineParams) -> Result<ConditionProducts> {
    params.validate()?;
    cache.load(camera)?;
    let neighbor = select_neighbor(&cache.scene.rig, camera, shift)?;
    if let Some(n) = neighbor {
        cache.load(n)?;
    }

    let target = cache.get(camera);
    let k = target.intrinsics;
    // Everything happens in the ego frame of this instant.
    let virt_ego = make_virtual_pose(&CameraPose::identity(), shift, params.shift_bound)?;
    let virt_cam = virt_ego.compose(&target.cam2ego);

    let cloud = target.to_pointcloud(params.stride)?;
    let (shifted, zbuffer) = render_shift_image(&cloud, &virt_cam, &k, params);
    let mask = compute_occlusion_mask(&cloud, &virt_cam, &k, &zbuffer, camera, params)?;
    drop(cloud);
    let masked = apply_mask(&target.image, &mask)?;
    let warp = match neighbor {
        Some(n) => warp_neighbor(cache.get(n), &CameraPose::identity(), &virt_cam, &k, params)?,
        None => ImageBuffer::new(k.width(), k.height()),
    };
    let condition = composite_seam(&masked, &warp, &mask)?;
    Ok(ConditionProducts {
        raw: target.image.clone(),
        shifted,
        zbuffer,
        mask,
        masked,
        warp,
        neighbor,
        condition,
    })
}

fn sample_from(scene: &SceneManifest, frame: usize, camera: u16, shift: ShiftSpec, params: PipelineParams, p: ConditionProducts) -> Result<ConditionSample> {
    let name = |id: u16| scene.rig.camera(id).map(|c| c.name.clone());
    Ok(ConditionSample {
        raw: p.raw,
        condition: p.condition,
        mask: p.mask,
        shift,
        frame,
        camera,
        camera_name: name(camera)?,
        neighbor: p.neighbor,
        neighbor_name: p.neighbor.map(name).transpose()?,
        params,
    })
}

/// Runs the whole chain (lift, shift, mask, neighbour warp, composite) for
/// one camera of one frame and keeps every intermediate.
pub fn condition_products(
    scene: &SceneManifest,
    frame: usize,
    camera: u16,
    shift: &ShiftSpec,
    params: &PipelineParams,
) -> Result<ConditionProducts> {
    products_with(&mut FrameCache::new(scene, frame)?, camera, shift, params)
}

pub fn build_condition_frame(
    scene: &SceneManifest,
    frame: usize,
    camera: u16,
    shift: &ShiftSpec,
    params: &PipelineParams,
) -> Result<ConditionSample> {
    let p = condition_products(scene, frame, camera, shift, params)?;
    sample_from(scene, frame, camera, *shift, *params, p)
}

fn build_frame(scene: &SceneManifest, frame: usize, sampler: &ShiftSampler, params: &PipelineParams) -> Result<Vec<ConditionSample>> {
    let mut cache = FrameCache::new(scene, frame)?;
    (0..scene.rig.len() as u16)
        .map(|camera| {
            let shift = sampler.shift_for(frame, camera);
            let p = products_with(&mut cache, camera, &shift, params)?;
            sample_from(scene, frame, camera, shift, *params, p)
        })
        .collect()
}

/// Consumer of built samples, fed in `(frame, camera)` order.
pub trait SampleSink {
    fn accept(&mut self, sample: ConditionSample) -> Result<()>;
}

impl<F: FnMut(ConditionSample) -> Result<()>> SampleSink for F {
    fn accept(&mut self, sample: ConditionSample) -> Result<()> {
        self(sample)
    }
}

/// Writes each sample to `<root>/<frame>_<camera>/`.
pub struct DirectorySink {
    pub root: PathBuf,
}

impl SampleSink for DirectorySink {
    fn accept(&mut self, sample: ConditionSample) -> Result<()> {
        let dir = self.root.join(sample_dir_name(sample.frame, &sample.camera_name));
        write_sample(&sample, &dir)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildStats {
    pub frames: usize,
    pub samples: usize,
    /// Sample counts by mask fraction, bins of width 0.1 (1.0 lands in the last).
    pub mask_histogram: [u64; HISTOGRAM_BINS],
    pub wall_time: Duration,
    /// Peak heap growth over the build, when the tracking allocator is installed.
    pub peak_tracked_bytes: Option<usize>,
}

pub fn histogram_bin(fraction: f64) -> usize {
    ((fraction * HISTOGRAM_BINS as f64).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

#[derive(Debug, thiserror::Error)]
#[error("build aborted after {} frames: {error}", partial.frames)]
pub struct BuildFailure {
    #[source]
    pub error: Error,
    pub partial: BuildStats,
}

struct Tracker {
    start: Instant,
    baseline: Option<usize>,
    stats: BuildStats,
}

impl Tracker {
    fn new() -> Self {
        let baseline = alloc::is_installed().then(alloc::reset_peak);
        Self {
            start: Instant::now(),
            baseline,
            stats: BuildStats::default(),
        }
    }

    fn finish(mut self) -> BuildStats {
        self.stats.wall_time = self.start.elapsed();
        self.stats.peak_tracked_bytes = self.baseline.map(|b| alloc::peak().saturating_sub(b));
        self.stats
    }

    fn fail(self, error: Error) -> BuildFailure {
        BuildFailure {
            error,
            partial: self.finish(),
        }
    }
}

/// Builds one sample per `(frame, camera)` and hands them to `sink` in
/// order. Up to `workers` frames are in flight at once; nothing else about
/// the scene is held in memory, so the working set does not grow with the
/// number of frames. Output is identical for every worker count.
pub fn stream_build(
    scene: &SceneManifest,
    sampler: &ShiftSampler,
    params: &PipelineParams,
    workers: usize,
    sink: &mut dyn SampleSink,
) -> Result<BuildStats, BuildFailure> {
    let mut tracker = Tracker::new();
    if let Err(e) = params.validate().and_then(|_| sampler.validate(params.shift_bound)) {
        return Err(tracker.fail(e));
    }
    let workers = workers.max(1);
    let n = scene.frames.len();
    let mut next = 0;
    while next < n {
        let end = (next + workers).min(n);
        let results: Vec<Result<Vec<ConditionSample>>> = if end - next == 1 {
            vec![build_frame(scene, next, sampler, params)]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = (next..end)
                    .map(|f| s.spawn(move || build_frame(scene, f, sampler, params)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err(Error::Sink("worker thread panicked".into()))))
                    .collect()
            })
        };
        for result in results {
            let samples = match result {
                Ok(s) => s,
                Err(e) => return Err(tracker.fail(e)),
            };
            for sample in samples {
                let bin = histogram_bin(sample.mask.masked_fraction());
                if let Err(e) = sink.accept(sample) {
                    return Err(tracker.fail(e));
                }
                tracker.stats.samples += 1;
                tracker.stats.mask_histogram[bin] += 1;
            }
            tracker.stats.frames += 1;
        }
        next = end;
    }
    Ok(tracker.finish())
}
