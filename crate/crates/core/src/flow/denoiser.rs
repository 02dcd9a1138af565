//! `F_θ(z_t, t, c)`: every `p × p` latent patch is flattened, concatenated
//! as `(z_t ‖ c ‖ time embedding)` and mapped by `W2 · tanh(W1 x + b1) + b2`
//! to the velocity of that patch. Patches share weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::LatentTensor;
use crate::rng;

/// Order of the concatenated input, echoed into checkpoints.
pub const INPUT_LAYOUT: &str = "z_t,c,t_embed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiserConfig {
    pub channels: usize,
    pub patch: usize,
    pub hidden: usize,
    /// Number of sinusoidal time features (even).
    pub time_embed: usize,
    /// Codec downscale factor the model was trained with.
    pub downscale: u32,
    pub seed: u64,
    pub zero_init_output: bool,
    pub layout: String,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            channels: 3,
            patch: 1,
            hidden: 64,
            time_embed: 8,
            downscale: 4,
            seed: 0,
            zero_init_output: false,
            layout: INPUT_LAYOUT.into(),
        }
    }
}

impl DenoiserConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.patch == 0 || self.hidden == 0 {
            return Err(Error::invalid("channels, patch and hidden must be positive"));
        }
        if self.time_embed % 2 != 0 {
            return Err(Error::invalid(format!("time_embed {} must be even", self.time_embed)));
        }
        if !matches!(self.downscale, 1 | 2 | 4) {
            return Err(Error::invalid(format!("downscale {} not in {{1, 2, 4}}", self.downscale)));
        }
        if self.layout != INPUT_LAYOUT {
            return Err(Error::invalid(format!("unsupported input layout {:?}", self.layout)));
        }
        Ok(())
    }

    fn patch_values(&self) -> usize {
        self.patch * self.patch * self.channels
    }

    pub fn input_dim(&self) -> usize {
        2 * self.patch_values() + self.time_embed
    }

    pub fn output_dim(&self) -> usize {
        self.patch_values()
    }

    pub fn param_count(&self) -> usize {
        let (d, h, o) = (self.input_dim(), self.hidden, self.output_dim());
        h * d + h + o * h + o
    }
}

/// `[sin(π 2^k t), cos(π 2^k t)]` for `k = 0 .. size/2`.
pub fn time_embedding(t: f64, size: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(size);
    for k in 0..size / 2 {
        let w = std::f64::consts::PI * f64::from(1u32 << k.min(30));
        out.push((w * t).sin());
        out.push((w * t).cos());
    }
    out
}

/// One training example: predict `target` from `(z_t, t, c)`.
#[derive(Debug, Clone)]
pub struct Example {
    pub z_t: LatentTensor,
    pub t: f64,
    pub c: LatentTensor,
    pub target: LatentTensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDenoiser {
    config: DenoiserConfig,
    params: Vec<f64>,
}

struct Views<'a> {
    w1: &'a [f64],
    b1: &'a [f64],
    w2: &'a [f64],
    b2: &'a [f64],
}

impl ToyDenoiser {
    /// Gaussian `W1 ~ N(0, 1/d_in)`, `W2 ~ N(0, 1/hidden)` (or zero), zero biases.
    pub fn new(config: DenoiserConfig) -> Result<Self> {
        config.validate()?;
        let (d, h, o) = (config.input_dim(), config.hidden, config.output_dim());
        let mut params = vec![0.0; config.param_count()];
        let key = rng::derive(config.seed, 0x1417);
        let s1 = 1.0 / (d as f64).sqrt();
        for (i, p) in params[..h * d].iter_mut().enumerate() {
            *p = s1 * rng::gaussian(key, i as u64);
        }
        if !config.zero_init_output {
            let s2 = 1.0 / (h as f64).sqrt();
            let start = h * d + h;
            for (i, p) in params[start..start + o * h].iter_mut().enumerate() {
                *p = s2 * rng::gaussian(key, (h * d + i) as u64);
            }
        }
        Ok(Self { config, params })
    }

    pub fn from_params(config: DenoiserConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if params.len() != config.param_count() {
            return Err(Error::invalid(format!(
                "config needs {} parameters, got {}",
                config.param_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("non-finite parameter"));
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn views(&self) -> Views<'_> {
        let (d, h, o) = (self.config.input_dim(), self.config.hidden, self.config.output_dim());
        let (w1, rest) = self.params.split_at(h * d);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(o * h);
        debug_assert_eq!(b2.len(), o);
        Views { w1, b1, w2, b2 }
    }

    fn check_inputs(&self, z_t: &LatentTensor, c: &LatentTensor, t: f64) -> Result<()> {
        z_t.ensure_same_shape(c, "denoiser input")?;
        let p = self.config.patch;
        if z_t.channels() != self.config.channels || z_t.height() % p != 0 || z_t.width() % p != 0 {
            return Err(Error::invalid(format!(
                "latent {:?} incompatible with {} channels and patch {p}",
                z_t.shape(),
                self.config.channels
            )));
        }
        if !t.is_finite() {
            return Err(Error::invalid("non-finite t"));
        }
        Ok(())
    }

    /// Calls `f(patch_row, patch_col, x)` with the input vector of every patch.
    fn for_each_patch(&self, z_t: &LatentTensor, c: &LatentTensor, t: f64, mut f: impl FnMut(usize, usize, &[f64])) {
        let p = self.config.patch;
        let pv = self.config.patch_values();
        let ch = self.config.channels;
        let mut x = vec![0.0; self.config.input_dim()];
        x[2 * pv..].copy_from_slice(&time_embedding(t, self.config.time_embed));
        for py in 0..z_t.height() / p {
            for px in 0..z_t.width() / p {
                let mut k = 0;
                for dy in 0..p {
                    for dx in 0..p {
                        for cc in 0..ch {
                            x[k] = z_t.get(py * p + dy, px * p + dx, cc);
                            x[pv + k] = c.get(py * p + dy, px * p + dx, cc);
                            k += 1;
                        }
                    }
                }
                f(py, px, &x);
            }
        }
    }

    fn hidden_and_output(&self, v: &Views, x: &[f64], h: &mut [f64], y: &mut [f64]) {
        let d = x.len();
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &v.w1[j * d..(j + 1) * d];
            *hj = (v.b1[j] + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>()).tanh();
        }
        let nh = h.len();
        for (o, yo) in y.iter_mut().enumerate() {
            let row = &v.w2[o * nh..(o + 1) * nh];
            *yo = v.b2[o] + row.iter().zip(h.iter()).map(|(w, hj)| w * hj).sum::<f64>();
        }
    }

    fn scatter(&self, out: &mut LatentTensor, py: usize, px: usize, y: &[f64]) {
        let p = self.config.patch;
        let mut k = 0;
        for dy in 0..p {
            for dx in 0..p {
                for cc in 0..self.config.channels {
                    out.set(py * p + dy, px * p + dx, cc, y[k]);
                    k += 1;
                }
            }
        }
    }

    pub fn forward(&self, z_t: &LatentTensor, t: f64, c: &LatentTensor) -> Result<LatentTensor> {
        self.check_inputs(z_t, c, t)?;
        let v = self.views();
        let mut out = LatentTensor::zeros(z_t.height(), z_t.width(), z_t.channels())?;
        let mut h = vec![0.0; self.config.hidden];
        let mut y = vec![0.0; self.config.output_dim()];
        self.for_each_patch(z_t, c, t, |py, px, x| {
            self.hidden_and_output(&v, x, &mut h, &mut y);
            self.scatter(&mut out, py, px, &y);
        });
        if out.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("denoiser produced a non-finite value"));
        }
        Ok(out)
    }

    /// Mean over `batch` of the per-example MSE.
    pub fn loss(&self, batch: &[Example]) -> Result<f64> {
        let mut total = 0.0;
        for ex in batch {
            total += crate::flow::fm_loss(&self.forward(&ex.z_t, ex.t, &ex.c)?, &ex.target)?;
        }
        Ok(total / batch.len().max(1) as f64)
    }

    /// The batch loss and its exact gradient with respect to every parameter.
    /// Examples are accumulated in the order given.
    pub fn loss_and_gradient(&self, batch: &[Example]) -> Result<(f64, Vec<f64>)> {
        let cfg = &self.config;
        let (d, nh, no) = (cfg.input_dim(), cfg.hidden, cfg.output_dim());
        let v = self.views();
        let mut grad = vec![0.0; self.params.len()];
        let (g_w1, rest) = grad.split_at_mut(nh * d);
        let (g_b1, rest) = rest.split_at_mut(nh);
        let (g_w2, g_b2) = rest.split_at_mut(no * nh);
        let mut h = vec![0.0; nh];
        let mut y = vec![0.0; no];
        let mut dh = vec![0.0; nh];
        let mut total = 0.0;
        let inv_b = 1.0 / batch.len().max(1) as f64;
        for ex in batch {
            self.check_inputs(&ex.z_t, &ex.c, ex.t)?;
            ex.z_t.ensure_same_shape(&ex.target, "denoiser target")?;
            let scale = 2.0 * inv_b / ex.z_t.len() as f64;
            let p = cfg.patch;
            let mut sq = 0.0;
            self.for_each_patch(&ex.z_t, &ex.c, ex.t, |py, px, x| {
                self.hidden_and_output(&v, x, &mut h, &mut y);
                // dL/dy, patch values in (dy, dx, channel) order
                let mut k = 0;
                for ddy in 0..p {
                    for ddx in 0..p {
                        for cc in 0..cfg.channels {
                            let r = y[k] - ex.target.get(py * p + ddy, px * p + ddx, cc);
                            sq += r * r;
                            y[k] = scale * r;
                            k += 1;
                        }
                    }
                }
                dh.iter_mut().for_each(|g| *g = 0.0);
                for o in 0..no {
                    let dy = y[o];
                    g_b2[o] += dy;
                    let row = &mut g_w2[o * nh..(o + 1) * nh];
                    let w_row = &v.w2[o * nh..(o + 1) * nh];
                    for j in 0..nh {
                        row[j] += dy * h[j];
                        dh[j] += w_row[j] * dy;
                    }
                }
                for j in 0..nh {
                    let da = dh[j] * (1.0 - h[j] * h[j]);
                    g_b1[j] += da;
                    let row = &mut g_w1[j * d..(j + 1) * d];
                    for (g, xi) in row.iter_mut().zip(x) {
                        *g += da * xi;
                    }
                }
            });
            total += sq / ex.z_t.len() as f64;
        }
        Ok((total * inv_b, grad))
    }
}
