//! Stand-in latent codec: block means scaled to [−1, 1], nearest-neighbour
//! decode.

use crate::error::{Error, Result};
use crate::flow::LatentTensor;
use crate::image::ImageBuffer;

fn check_factor(factor: u32) -> Result<()> {
    if matches!(factor, 1 | 2 | 4) {
        Ok(())
    } else {
        Err(Error::invalid(format!("downscale factor {factor} not in {{1, 2, 4}}")))
    }
}

pub fn toy_encode(image: &ImageBuffer, factor: u32) -> Result<LatentTensor> {
    check_factor(factor)?;
    let (w, h) = (image.width(), image.height());
    if w % factor != 0 || h % factor != 0 {
        return Err(Error::invalid(format!("image {w}x{h} not divisible by {factor}")));
    }
    let (lw, lh) = ((w / factor) as usize, (h / factor) as usize);
    let f = factor as usize;
    let mut out = LatentTensor::zeros(lh, lw, 3)?;
    let area = (f * f) as f64;
    for y in 0..lh {
        for x in 0..lw {
            let mut sum = [0u32; 3];
            for dy in 0..f {
                for dx in 0..f {
                    let p = image.get((x * f + dx) as u32, (y * f + dy) as u32);
                    for c in 0..3 {
                        sum[c] += u32::from(p[c]);
                    }
                }
            }
            for c in 0..3 {
                out.set(y, x, c, 2.0 * (f64::from(sum[c]) / area) / 255.0 - 1.0);
            }
        }
    }
    Ok(out)
}

pub fn toy_decode(latent: &LatentTensor, factor: u32) -> Result<ImageBuffer> {
    check_factor(factor)?;
    if latent.channels() != 3 {
        return Err(Error::invalid(format!("decode needs 3 channels, got {}", latent.channels())));
    }
    let f = factor as usize;
    let to_byte = |l: f64| ((l + 1.0) * 127.5 + 0.5).floor().clamp(0.0, 255.0) as u8;
    Ok(ImageBuffer::from_fn(
        (latent.width() * f) as u32,
        (latent.height() * f) as u32,
        |u, v| {
            let (x, y) = (u as usize / f, v as usize / f);
            [0, 1, 2].map(|c| to_byte(latent.get(y, x, c)))
        },
    ))
}

/// Peak signal-to-noise ratio in dB over all channels; infinite when equal.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    b.ensure_size(a.width(), a.height(), "psnr")?;
    let mse = a
        .as_bytes()
        .iter()
        .zip(b.as_bytes())
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
        .sum::<f64>()
        / a.as_bytes().len() as f64;
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}
