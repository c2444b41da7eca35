use super::dense::Parameterized;
use crate::error::Result;

/// Denominator floor used by [`relative_error`].
pub const ABSOLUTE_FLOOR: f64 = 1e-6;

/// `|a - b| / max(|a|, |b|, 1e-6)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(ABSOLUTE_FLOOR)
}

pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "gradient length mismatch");
    a.iter()
        .zip(b)
        .map(|(&x, &y)| relative_error(x, y))
        .fold(0.0, f64::max)
}

/// Central-difference gradient of `f` at `x`.
pub fn numeric_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + eps;
            let up = f(&probe);
            probe[i] = orig - eps;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
}

fn perturb<M: Parameterized + ?Sized>(model: &mut M, mut index: usize, delta: f64) {
    for layer in model.layers_mut() {
        let w = layer.weight.data.len();
        if index < w {
            layer.weight.data[index] += delta;
            return;
        }
        index -= w;
        let b = layer.bias.len();
        if index < b {
            layer.bias[index] += delta;
            return;
        }
        index -= b;
    }
    panic!("parameter index out of range");
}

fn flat_values<M: Parameterized + ?Sized>(model: &M) -> Vec<f64> {
    model
        .layers()
        .iter()
        .flat_map(|l| l.weight.data.iter().chain(&l.bias).copied())
        .collect()
}

fn set_flat_values<M: Parameterized + ?Sized>(model: &mut M, values: &[f64]) {
    let mut offset = 0;
    for layer in model.layers_mut() {
        let w = layer.weight.data.len();
        layer.weight.data.copy_from_slice(&values[offset..offset + w]);
        offset += w;
        let b = layer.bias.len();
        layer.bias.copy_from_slice(&values[offset..offset + b]);
        offset += b;
    }
}

/// Compares the analytic gradient that `loss_and_grad` accumulates into the
/// model against central differences over every parameter.
///
/// `loss_and_grad` must return the loss and add its gradient to the model's
/// gradient buffers; the checker zeroes them before each call.
pub fn grad_check<M: Parameterized + ?Sized>(
    model: &mut M,
    mut loss_and_grad: impl FnMut(&mut M) -> Result<f64>,
    eps: f64,
) -> Result<GradCheckReport> {
    model.zero_grad();
    loss_and_grad(model)?;
    let analytic: Vec<f64> = model
        .layers()
        .iter()
        .flat_map(|l| l.grad_weight.data.iter().chain(&l.grad_bias).copied())
        .collect();
    let original = flat_values(model);
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        perturb(model, i, eps);
        let up = loss_and_grad(model)?;
        set_flat_values(model, &original);
        perturb(model, i, -eps);
        let down = loss_and_grad(model)?;
        set_flat_values(model, &original);
        worst = worst.max(relative_error(a, (up - down) / (2.0 * eps)));
    }
    model.zero_grad();
    Ok(GradCheckReport {
        max_relative_error: worst,
        checked: analytic.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Dense;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_loss_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut layer = Dense::new("l", 4, 3, &mut rng);
        let x = [0.5, -1.0, 2.0, 0.25];
        let report = grad_check(
            &mut layer,
            |l| {
                let y = l.forward(&x)?;
                l.backward(&x, &[1.0, -2.0, 0.5])?;
                Ok(y[0] - 2.0 * y[1] + 0.5 * y[2])
            },
            1e-5,
        )
        .unwrap();
        assert_eq!(report.checked, 15);
        assert!(report.max_relative_error < 1e-9, "{report:?}");
    }

    #[test]
    fn detects_wrong_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut layer = Dense::new("l", 2, 1, &mut rng);
        let x = [1.0, 2.0];
        let report = grad_check(
            &mut layer,
            |l| {
                let y = l.forward(&x)?;
                l.backward(&x, &[2.0])?;
                Ok(y[0])
            },
            1e-5,
        )
        .unwrap();
        assert!(report.max_relative_error > 0.4);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!(relative_error(1e-12, 0.0) < 1e-5);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-12);
    }
}
