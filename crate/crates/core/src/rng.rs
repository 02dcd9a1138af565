//! Counter-based random numbers.
//!
//! Every draw is a pure function of `(key, counter)`, so any element of any
//! stream can be generated independently of the others, in any order and on
//! any thread. The construction is SplitMix64:
//!
//! ```text
//! state = key + (counter + 1) * 0x9E3779B97F4A7C15        (wrapping)
//! z = (state ^ (state >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! out = z ^ (z >> 31)
//! ```
//!
//! Uniforms take the top 53 bits: `(out >> 11) * 2^-53`, in `[0, 1)`.
//! Gaussians use Box-Muller on the uniforms at counters `2i` and `2i + 1`:
//! `sqrt(-2 ln(1 - u0)) * cos(2π u1)`.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output for `counter` in the stream identified by `key`.
#[inline]
pub fn mix(key: u64, counter: u64) -> u64 {
    let mut z = key.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a sub-stream key, e.g. one per training step or per sample.
#[inline]
pub fn derive(key: u64, tag: u64) -> u64 {
    mix(key ^ 0xA076_1D64_78BD_642F, tag)
}

#[inline]
pub fn uniform(key: u64, counter: u64) -> f64 {
    (mix(key, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw number `index` of stream `key`.
#[inline]
pub fn gaussian(key: u64, index: u64) -> f64 {
    let u0 = uniform(key, 2 * index);
    let u1 = uniform(key, 2 * index + 1);
    (-2.0 * (1.0 - u0).ln()).sqrt() * (std::f64::consts::TAU * u1).cos()
}

/// Fills `out` with standard normal draws `0..out.len()` of stream `key`.
pub fn fill_gaussian(key: u64, out: &mut [f64]) {
    for (i, v) in out.iter_mut().enumerate() {
        *v = gaussian(key, i as u64);
    }
}
