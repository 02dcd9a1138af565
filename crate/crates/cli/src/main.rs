//! `vshift`: command-line driver for scene generation, virtual-shift
//! rendering, dataset building and the toy inpainter.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use vshift::dataset::{self, PipelineConfig, SceneManifest};
use vshift::flow::{self, TrainConfig};
use vshift::oracle::{self, SceneSpec};
use vshift::{netpbm, Error, ShiftSpec};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  unexpected failure
  2  usage error (unknown flag, bad value)
  3  missing or unreadable file
  4  invalid input or violated invariant
  5  verify found mismatching samples
  6  corrupt or malformed file

Errors are printed to stderr as one JSON object: {\"error\": kind, \"message\": text, \"exit_code\": n}.";

#[derive(Parser)]
#[command(name = "vshift", version, about = "Virtual-shift inpainting data pipeline", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a procedural scene spec into images, depths and a manifest.
    GenScene { spec: PathBuf, out: PathBuf },
    /// Render the shifted view of one camera (shift.ppm).
    Shift(ViewArgs),
    /// Write the occlusion mask and the masked image (mask.pgm, masked.ppm).
    Mask(ViewArgs),
    /// Write the neighbour warp and the composited condition (warp.ppm, cond.ppm).
    Seam(ViewArgs),
    /// Build condition/raw pairs for every frame and camera.
    BuildDataset(BuildArgs),
    /// Train the toy flow-matching inpainter on a built dataset.
    TrainToy(TrainArgs),
    /// Inpaint a condition image with a trained checkpoint.
    Sample {
        checkpoint: PathBuf,
        condition: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Mask-fraction histogram CSV and a raw/cond/mask contact sheet.
    Report {
        dataset: PathBuf,
        /// Output directory (defaults to the dataset directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild every sample from the source scene and compare bytes.
    Verify { dataset: PathBuf },
}

/// Overrides for the pipeline config; unset flags keep the file/default value.
#[derive(Args, Clone)]
struct ParamArgs {
    /// JSON pipeline config; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    depth_tol: Option<f64>,
    #[arg(long)]
    z_min: Option<f64>,
    #[arg(long)]
    splat_radius: Option<u32>,
    #[arg(long)]
    stride: Option<u32>,
    #[arg(long)]
    shift_bound: Option<f64>,
}

#[derive(Args)]
struct ViewArgs {
    manifest: PathBuf,
    #[arg(long)]
    frame: usize,
    /// Camera name or rig index.
    #[arg(long)]
    camera: String,
    /// Meters, positive = left.
    #[arg(long, allow_hyphen_values = true)]
    lateral: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    longitudinal: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    vertical: f64,
    /// Radians about ego +z.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    yaw: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct BuildArgs {
    manifest: PathBuf,
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Shifts are drawn uniformly from [-r, r] meters.
    #[arg(long)]
    lateral_range: Option<f64>,
    #[arg(long)]
    longitudinal_range: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct TrainArgs {
    dataset: PathBuf,
    checkpoint: PathBuf,
    /// JSON training config; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    downscale: Option<u32>,
    #[arg(long)]
    hidden: Option<usize>,
    /// Use at most this many samples (in directory order).
    #[arg(long)]
    max_samples: Option<usize>,
    /// Loss trace CSV (defaults to <checkpoint>.loss.csv).
    #[arg(long)]
    loss_csv: Option<PathBuf>,
}

struct Failure {
    kind: &'static str,
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        use vshift::dataset::ManifestError as M;
        let (kind, code) = match &e {
            Error::Io { .. } => ("io", 3),
            Error::Manifest(M::Io { .. } | M::MissingFile { .. }) => ("io", 3),
            Error::Manifest(M::Json { .. }) => ("format", 6),
            Error::Format { .. } | Error::Json { .. } => ("format", 6),
            Error::Manifest(_) => ("invalid_manifest", 4),
            Error::InvalidInput(_) => ("invalid_input", 4),
            Error::DegenerateView(_) => ("degenerate_view", 4),
            Error::Diverged { .. } => ("diverged", 4),
            Error::Sink(_) => ("sink", 1),
        };
        Failure {
            kind,
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = Result<Value, Failure>;

fn pipeline_config(args: &ParamArgs) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let p = &mut cfg.params;
    if let Some(v) = args.depth_tol {
        p.depth_tol = v;
    }
    if let Some(v) = args.z_min {
        p.z_min = v;
    }
    if let Some(v) = args.splat_radius {
        p.splat_radius = v;
    }
    if let Some(v) = args.stride {
        p.stride = v;
    }
    if let Some(v) = args.shift_bound {
        p.shift_bound = v;
    }
    Ok(cfg)
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
    .into()
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn camera_id(scene: &SceneManifest, camera: &str) -> Result<u16, Failure> {
    match scene.rig.index_of(camera) {
        Ok(id) => Ok(id),
        Err(e) => match camera.parse::<u16>() {
            Ok(id) if usize::from(id) < scene.rig.len() => Ok(id),
            _ => Err(e.into()),
        },
    }
}

enum View {
    Shift,
    Mask,
    Seam,
}

fn run_view(args: &ViewArgs, view: View) -> CliResult {
    let cfg = pipeline_config(&args.params)?;
    cfg.validate()?;
    let scene = dataset::load_manifest(&args.manifest).map_err(Error::from)?;
    let camera = camera_id(&scene, &args.camera)?;
    let shift = ShiftSpec {
        lateral: args.lateral,
        longitudinal: args.longitudinal,
        vertical: args.vertical,
        yaw: args.yaw,
    };
    let p = dataset::condition_products(&scene, args.frame, camera, &shift, &cfg.params)?;
    fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
    write_text(&args.out.join("effective_config.json"), &cfg.to_json())?;
    let mut written = Vec::new();
    let mut ppm = |name: &str, img: &vshift::ImageBuffer| -> Result<(), Failure> {
        let path = args.out.join(name);
        netpbm::write_ppm(&path, img)?;
        written.push(path);
        Ok(())
    };
    match view {
        View::Shift => ppm("shift.ppm", &p.shifted)?,
        View::Mask => {
            ppm("masked.ppm", &p.masked)?;
            let path = args.out.join("mask.pgm");
            netpbm::write_pgm8(&path, p.mask.width(), p.mask.height(), &p.mask.codes())?;
            written.push(path);
        }
        View::Seam => {
            ppm("warp.ppm", &p.warp)?;
            ppm("cond.ppm", &p.condition)?;
        }
    }
    let neighbor = p.neighbor.map(|n| scene.rig.cameras()[usize::from(n)].name.clone());
    Ok(json!({
        "written": written,
        "mask_fraction": p.mask.masked_fraction(),
        "neighbor": neighbor,
    }))
}

fn run_build(args: &BuildArgs) -> CliResult {
    let mut cfg = pipeline_config(&args.params)?;
    if let Some(v) = args.seed {
        cfg.sampler.seed = v;
    }
    if let Some(v) = args.lateral_range {
        cfg.sampler.lateral_range = v;
    }
    if let Some(v) = args.longitudinal_range {
        cfg.sampler.longitudinal_range = v;
    }
    if let Some(v) = args.workers {
        cfg.workers = v;
    }
    let stats = dataset::build_dataset(&args.manifest, &args.out, &cfg)?;
    Ok(json!({
        "frames": stats.frames,
        "samples": stats.samples,
        "mask_histogram": stats.mask_histogram,
        "wall_time_s": stats.wall_time.as_secs_f64(),
    }))
}

fn run_train(args: &TrainArgs) -> CliResult {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            serde_json::from_str::<TrainConfig>(&text).map_err(|source| Error::Json {
                path: p.clone(),
                source,
            })?
        }
        None => TrainConfig::default(),
    };
    if let Some(v) = args.steps {
        cfg.steps = v;
    }
    if let Some(v) = args.lr {
        cfg.lr = v;
    }
    if let Some(v) = args.batch {
        cfg.batch = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.downscale {
        cfg.downscale = v;
    }
    if let Some(v) = args.hidden {
        cfg.hidden = v;
    }
    cfg.validate()?;
    let mut dirs = dataset::list_samples(&args.dataset)?;
    if let Some(n) = args.max_samples {
        dirs.truncate(n);
    }
    let samples = dirs.iter().map(|d| dataset::read_sample(d)).collect::<Result<Vec<_>, _>>()?;
    let out = flow::train(&samples, &cfg)?;
    flow::save_checkpoint(&out.model, &args.checkpoint)?;
    let csv = args
        .loss_csv
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.loss.csv", args.checkpoint.display())));
    flow::write_loss_csv(&out.loss_trace, &csv)?;
    Ok(json!({
        "samples": samples.len(),
        "steps": cfg.steps,
        "initial_loss": out.loss_trace.first(),
        "final_loss": out.loss_trace.last(),
        "checkpoint": args.checkpoint,
        "loss_csv": csv,
    }))
}

fn run(command: Command) -> CliResult {
    match command {
        Command::GenScene { spec, out } => {
            let text = fs::read_to_string(&spec).map_err(|e| io_err(&spec, e))?;
            let spec_value: SceneSpec = serde_json::from_str(&text).map_err(|source| Error::Json {
                path: spec.clone(),
                source,
            })?;
            let m = oracle::gen_scene(&spec_value, &out)?;
            Ok(json!({
                "manifest": out.join("manifest.json"),
                "frames": m.frames.len(),
                "cameras": m.rig.len(),
            }))
        }
        Command::Shift(a) => run_view(&a, View::Shift),
        Command::Mask(a) => run_view(&a, View::Mask),
        Command::Seam(a) => run_view(&a, View::Seam),
        Command::BuildDataset(a) => run_build(&a),
        Command::TrainToy(a) => run_train(&a),
        Command::Sample {
            checkpoint,
            condition,
            out,
            steps,
            seed,
        } => {
            let model = flow::load_checkpoint(&checkpoint)?;
            let cond = netpbm::read_ppm(&condition)?;
            let img = flow::sample(&model, &cond, steps, seed)?;
            netpbm::write_ppm(&out, &img)?;
            Ok(json!({ "written": out }))
        }
        Command::Report { dataset: dir, out } => {
            let out = out.unwrap_or_else(|| dir.clone());
            let r = dataset::report_dataset(&dir, &out)?;
            Ok(json!({
                "samples": r.samples,
                "mask_histogram": r.histogram,
                "histogram_csv": r.histogram_csv,
                "contact_sheet": r.contact_sheet,
            }))
        }
        Command::Verify { dataset: dir } => {
            let r = dataset::verify_dataset(&dir)?;
            if r.ok() {
                Ok(json!({ "checked": r.checked, "mismatches": 0 }))
            } else {
                Err(Failure {
                    kind: "verify_mismatch",
                    code: 5,
                    message: format!("{} of {} samples differ: {}", r.mismatches.len(), r.checked, r.mismatches.join("; ")),
                })
            }
        }
    }
}

fn fail(f: Failure) -> ExitCode {
    eprintln!("{}", json!({ "error": f.kind, "message": f.message, "exit_code": f.code }));
    ExitCode::from(f.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            return fail(Failure {
                kind: "usage",
                code: 2,
                message: e.render().to_string().trim().to_string(),
            })
        }
    };
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => fail(f),
    }
}
