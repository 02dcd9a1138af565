//! Scene ingestion, shift sampling, condition-pair generation and the
//! on-disk sample format.

mod build;
mod config;
pub mod manifest;
mod sample_io;
mod sampler;
mod tools;

pub use build::{
    build_condition_frame, condition_products, stream_build, BuildFailure, BuildStats, ConditionProducts,
    ConditionSample, DirectorySink, SampleSink, histogram_bin, HISTOGRAM_BINS,
};
pub use config::PipelineConfig;
pub use manifest::{load_manifest, Frame, ManifestError, SceneManifest, SCHEMA_VERSION};
pub use sample_io::{read_sample, sample_dir_name, write_sample, SampleMeta, PIPELINE_VERSION};
pub use sampler::ShiftSampler;
pub use tools::{
    build_dataset, list_samples, read_index, report_dataset, verify_dataset, DatasetIndex, ReportSummary,
    VerifyReport,
};
