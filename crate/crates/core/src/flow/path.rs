//! The straight path `z_t = (1 − t) z0 + t z1` between data and noise, its
//! constant velocity `z1 − z0`, and Euler integration from noise back to data.

use crate::error::{Error, Result};
use crate::flow::LatentTensor;

pub fn fm_interpolate(z0: &LatentTensor, z1: &LatentTensor, t: f64) -> Result<LatentTensor> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("t = {t} outside [0, 1]")));
    }
    z0.zip_with(z1, "fm_interpolate", |a, b| (1.0 - t) * a + t * b)
}

pub fn fm_target(z0: &LatentTensor, z1: &LatentTensor) -> Result<LatentTensor> {
    z0.zip_with(z1, "fm_target", |a, b| b - a)
}

/// Mean squared error over all elements.
pub fn fm_loss(pred: &LatentTensor, target: &LatentTensor) -> Result<f64> {
    pred.ensure_same_shape(target, "fm_loss")?;
    let sum: f64 = pred.data().iter().zip(target.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / pred.len() as f64)
}

/// Integrates `dz/dt = field(z, t)` from `t = 1` down to `t = 0` in `steps`
/// equal steps: `z ← z − Δt · field(z, t)`.
pub fn euler_integrate(
    z1: LatentTensor,
    steps: usize,
    mut field: impl FnMut(&LatentTensor, f64) -> Result<LatentTensor>,
) -> Result<LatentTensor> {
    if steps == 0 {
        return Err(Error::invalid("sampling needs at least one step"));
    }
    let dt = 1.0 / steps as f64;
    let mut z = z1;
    for i in 0..steps {
        let t = 1.0 - i as f64 * dt;
        let v = field(&z, t)?;
        z = z.zip_with(&v, "euler step", |a, b| a - dt * b)?;
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(key: u64) -> LatentTensor {
        LatentTensor::gaussian(3, 4, 3, key).unwrap()
    }

    fn scale(a: &LatentTensor, s: f64) -> LatentTensor {
        a.zip_with(a, "scale", |x, _| s * x).unwrap()
    }

    #[test]
    fn endpoints_and_midpoint() {
        let (z0, z1) = (t(1), t(2));
        assert_eq!(fm_interpolate(&z0, &z1, 0.0).unwrap(), z0);
        assert_eq!(fm_interpolate(&z0, &z1, 1.0).unwrap(), z1);
        let mid = fm_interpolate(&z0, &scale(&z0, -1.0), 0.5).unwrap();
        assert!(mid.data().iter().all(|&v| v == 0.0));
        assert!(fm_interpolate(&z0, &z1, 1.5).is_err());
        let other = LatentTensor::zeros(2, 2, 3).unwrap();
        assert!(fm_interpolate(&z0, &other, 0.5).is_err());
        assert!(fm_target(&z0, &other).is_err());
    }

    #[test]
    fn target_examples() {
        let (z0, z1) = (t(3), t(4));
        assert!(fm_target(&z0, &z0).unwrap().data().iter().all(|&v| v == 0.0));
        let zero = LatentTensor::zeros(3, 4, 3).unwrap();
        assert_eq!(fm_target(&zero, &z1).unwrap(), z1);
        let a = 2.5;
        let lhs = fm_target(&scale(&z0, a), &scale(&z1, a)).unwrap();
        let rhs = scale(&fm_target(&z0, &z1).unwrap(), a);
        for (x, y) in lhs.data().iter().zip(rhs.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_examples() {
        let target = t(5);
        assert_eq!(fm_loss(&target, &target).unwrap(), 0.0);
        let off = target.zip_with(&target, "", |x, _| x + 1.0).unwrap();
        assert!((fm_loss(&off, &target).unwrap() - 1.0).abs() < 1e-12);
        let pred = t(6);
        let doubled = pred.zip_with(&target, "", |p, q| q + 2.0 * (p - q)).unwrap();
        let ratio = fm_loss(&doubled, &target).unwrap() / fm_loss(&pred, &target).unwrap();
        assert!((ratio - 4.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn target_is_the_path_derivative(k0: u64, k1: u64, t0 in 0.0f64..0.9, d in 1e-3f64..0.1) {
            let (z0, z1) = (t(k0), t(k1));
            let a = fm_interpolate(&z0, &z1, t0).unwrap();
            let b = fm_interpolate(&z0, &z1, t0 + d).unwrap();
            let v = fm_target(&z0, &z1).unwrap();
            for i in 0..v.len() {
                prop_assert!(((b.data()[i] - a.data()[i]) / d - v.data()[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn oracle_field_one_step_and_many_steps() {
        let (z0, z1) = (t(7), t(8));
        let v = fm_target(&z0, &z1).unwrap();
        let one = euler_integrate(z1.clone(), 1, |_, _| Ok(v.clone())).unwrap();
        let fifty = euler_integrate(z1.clone(), 50, |_, _| Ok(v.clone())).unwrap();
        for i in 0..z0.len() {
            assert!((one.data()[i] - z0.data()[i]).abs() <= 4.0 * f64::EPSILON);
            assert!((fifty.data()[i] - one.data()[i]).abs() < 1e-12);
        }
        assert!(euler_integrate(z1, 0, |_, _| Ok(v.clone())).is_err());
    }

    #[test]
    fn oracle_field_is_bit_exact_on_dyadic_values() {
        // Values on a 2^-8 grid keep every subtraction exact.
        let grid = |key| {
            let g = t(key);
            g.zip_with(&g, "", |x, _| (x * 256.0).round() / 256.0).unwrap()
        };
        let (z0, z1) = (grid(9), grid(10));
        let v = fm_target(&z0, &z1).unwrap();
        assert_eq!(euler_integrate(z1, 1, |_, _| Ok(v.clone())).unwrap(), z0);
    }
}
