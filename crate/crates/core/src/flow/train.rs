//! Training by plain gradient descent on the flow-matching loss, and
//! sampling by Euler integration of the learned velocity.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::ConditionSample;
use crate::error::{Error, Result};
use crate::flow::denoiser::Example;
use crate::flow::{euler_integrate, fm_interpolate, fm_target, toy_decode, toy_encode, DenoiserConfig, LatentTensor, ToyDenoiser, INPUT_LAYOUT};
use crate::image::ImageBuffer;
use crate::rng;

const TAG_TRAIN: u64 = 1;
const TAG_PROBE: u64 = 2;
const TAG_SAMPLE: u64 = 3;
/// Points of the fixed time grid the loss trace is measured on.
const PROBE_TIMES: usize = 8;

/// Distribution of training times `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeSampling {
    Uniform,
    /// `sigmoid(n)` with `n ~ N(0, 1)`.
    LogitNormal,
}

impl TimeSampling {
    fn draw(self, key: u64, i: u64) -> f64 {
        match self {
            TimeSampling::Uniform => rng::uniform(key, i),
            TimeSampling::LogitNormal => sigmoid(rng::gaussian(key, i)),
        }
    }

    fn quantile(self, q: f64) -> f64 {
        match self {
            TimeSampling::Uniform => q,
            TimeSampling::LogitNormal => sigmoid(Normal::standard().inverse_cdf(q)),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Midpoint quantiles of the training-time distribution.
pub fn probe_times(sampling: TimeSampling, count: usize) -> Vec<f64> {
    (0..count).map(|k| sampling.quantile((k as f64 + 0.5) / count as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
    pub time_embed: usize,
    pub downscale: u32,
    pub hidden: usize,
    pub patch: usize,
    pub time_sampling: TimeSampling,
    pub zero_init_output: bool,
    /// How many training pairs the per-step loss trace is measured on.
    pub probe_pairs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.2,
            steps: 2000,
            batch: 4,
            seed: 0,
            time_embed: 8,
            downscale: 4,
            hidden: 64,
            patch: 1,
            time_sampling: TimeSampling::LogitNormal,
            zero_init_output: false,
            probe_pairs: 2,
        }
    }
}

impl TrainConfig {
    pub fn denoiser(&self) -> DenoiserConfig {
        DenoiserConfig {
            channels: 3,
            patch: self.patch,
            hidden: self.hidden,
            time_embed: self.time_embed,
            downscale: self.downscale,
            seed: self.seed,
            zero_init_output: self.zero_init_output,
            layout: INPUT_LAYOUT.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::invalid(format!("learning rate {} must be finite and >= 0", self.lr)));
        }
        if self.batch == 0 || self.probe_pairs == 0 {
            return Err(Error::invalid("batch and probe_pairs must be >= 1"));
        }
        self.denoiser().validate()
    }
}

/// Encoded `(raw, condition)` latents.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPair {
    pub z0: LatentTensor,
    pub c: LatentTensor,
}

pub fn encode_pairs(samples: &[ConditionSample], factor: u32) -> Result<Vec<TrainPair>> {
    samples
        .iter()
        .map(|s| {
            Ok(TrainPair {
                z0: toy_encode(&s.raw, factor)?,
                c: toy_encode(&s.condition, factor)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: ToyDenoiser,
    /// Probe loss before training (index 0) and after every step.
    pub loss_trace: Vec<f64>,
}

fn example(pair: &TrainPair, t: f64, noise_key: u64) -> Result<Example> {
    let (h, w, c) = pair.z0.shape();
    let z1 = LatentTensor::gaussian(h, w, c, noise_key)?;
    Ok(Example {
        z_t: fm_interpolate(&pair.z0, &z1, t)?,
        t,
        c: pair.c.clone(),
        target: fm_target(&pair.z0, &z1)?,
    })
}

/// Fixed set the trace is measured on: the first pairs, each at every
/// probe time, with noise that never changes between steps.
fn probe_set(pairs: &[TrainPair], config: &TrainConfig) -> Result<Vec<Example>> {
    let key = rng::derive(config.seed, TAG_PROBE);
    let times = probe_times(config.time_sampling, PROBE_TIMES);
    let mut out = Vec::new();
    for (i, pair) in pairs.iter().take(config.probe_pairs).enumerate() {
        for (k, &t) in times.iter().enumerate() {
            out.push(example(pair, t, rng::derive(key, (i * PROBE_TIMES + k) as u64))?);
        }
    }
    Ok(out)
}

fn training_batch(pairs: &[TrainPair], config: &TrainConfig, step: usize) -> Result<Vec<Example>> {
    let key = rng::derive(rng::derive(config.seed, TAG_TRAIN), step as u64);
    let (k_pick, k_time) = (rng::derive(key, 0), rng::derive(key, 1));
    (0..config.batch)
        .map(|b| {
            let pick = ((rng::uniform(k_pick, b as u64) * pairs.len() as f64) as usize).min(pairs.len() - 1);
            let t = config.time_sampling.draw(k_time, b as u64);
            example(&pairs[pick], t, rng::derive(key, 2 + b as u64))
        })
        .collect()
}

pub fn train_latents(pairs: &[TrainPair], config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    let first = pairs.first().ok_or_else(|| Error::invalid("no training pairs"))?;
    for p in pairs {
        p.z0.ensure_same_shape(&first.z0, "training pair")?;
        p.c.ensure_same_shape(&first.z0, "training pair")?;
    }
    let mut model = ToyDenoiser::new(config.denoiser())?;
    let probe = probe_set(pairs, config)?;
    let mut trace = Vec::with_capacity(config.steps + 1);
    trace.push(model.loss(&probe)?);
    for step in 0..config.steps {
        let batch = training_batch(pairs, config, step)?;
        let (_, grad) = model.loss_and_gradient(&batch)?;
        for (p, g) in model.params_mut().iter_mut().zip(&grad) {
            *p -= config.lr * g;
        }
        if model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { step });
        }
        trace.push(model.loss(&probe)?);
    }
    Ok(TrainOutput { model, loss_trace: trace })
}

pub fn train(samples: &[ConditionSample], config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    train_latents(&encode_pairs(samples, config.downscale)?, config)
}

/// Inpaints `condition`: Euler-integrates the model's velocity from seeded
/// noise at `t = 1` to `t = 0` and decodes.
pub fn sample(model: &ToyDenoiser, condition: &ImageBuffer, steps: usize, seed: u64) -> Result<ImageBuffer> {
    let factor = model.config().downscale;
    let c = toy_encode(condition, factor)?;
    let (h, w, ch) = c.shape();
    let z1 = LatentTensor::gaussian(h, w, ch, rng::derive(seed, TAG_SAMPLE))?;
    let z0 = euler_integrate(z1, steps, |z, t| model.forward(z, t, &c))?;
    toy_decode(&z0, factor)
}
