//! A toy latent flow-matching inpainter: block-mean codec, rectified-flow
//! path, a per-patch two-layer denoiser with hand-written gradients, plain
//! gradient descent and an Euler sampler.

mod checkpoint;
mod codec;
mod denoiser;
mod path;
mod tensor;
mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, write_loss_csv, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use codec::{psnr, toy_decode, toy_encode};
pub use denoiser::{time_embedding, DenoiserConfig, Example, ToyDenoiser, INPUT_LAYOUT};
pub use path::{euler_integrate, fm_interpolate, fm_loss, fm_target};
pub use tensor::LatentTensor;
pub use train::{
    encode_pairs, probe_times, sample, train, train_latents, TimeSampling, TrainConfig, TrainOutput, TrainPair,
};
