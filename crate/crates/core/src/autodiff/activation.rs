use crate::error::{Error, Result};

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// Gradient through ReLU given the pre-activation input.
pub fn relu_backward(pre: &[f64], upstream: &[f64]) -> Vec<f64> {
    pre.iter()
        .zip(upstream)
        .map(|(&p, &g)| if p > 0.0 { g } else { 0.0 })
        .collect()
}

pub fn tanh(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.tanh()).collect()
}

/// Gradient through tanh given its output.
pub fn tanh_backward(out: &[f64], upstream: &[f64]) -> Vec<f64> {
    out.iter()
        .zip(upstream)
        .map(|(&y, &g)| g * (1.0 - y * y))
        .collect()
}

/// Returns the unit vector and the original norm.
pub fn l2_normalize(x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = super::norm(x);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroNorm("l2_normalize"));
    }
    Ok((x.iter().map(|v| v / n).collect(), n))
}

/// Gradient through `y = x / |x|` given `y` and `|x|`.
pub fn l2_normalize_backward(unit: &[f64], norm: f64, upstream: &[f64]) -> Vec<f64> {
    let proj = super::dot(unit, upstream);
    unit.iter()
        .zip(upstream)
        .map(|(&y, &g)| (g - y * proj) / norm)
        .collect()
}
