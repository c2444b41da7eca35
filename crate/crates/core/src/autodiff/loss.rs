use crate::error::{Error, Result};

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-log softmax(logits)[label]` and its gradient `softmax - onehot`.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum();
    let log_sum = sum.ln() + max;
    let loss = log_sum - logits[label];
    let mut grad: Vec<f64> = logits.iter().map(|&z| (z - log_sum).exp()).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Mean Huber-style loss with unit threshold, and its gradient on `pred`.
pub fn smooth_l1(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::DimMismatch {
            expected: target.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("smooth_l1 input"));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &u)| {
            let d = p - u;
            if d.abs() <= 1.0 {
                loss += 0.5 * d * d;
                d / n
            } else {
                loss += d.abs() - 0.5;
                d.signum() / n
            }
        })
        .collect();
    Ok((loss / n, grad))
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (na, nb) = (super::norm(a), super::norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm("cosine similarity"));
    }
    Ok(super::dot(a, b) / (na * nb))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CosineMarginLoss {
    pub loss: f64,
    pub cosine: f64,
    pub grad_a: Vec<f64>,
    pub grad_b: Vec<f64>,
}

/// `1 - cos(a, b)` for a matching pair, `max(0, cos(a, b) - margin)` otherwise.
pub fn cosine_margin_loss(a: &[f64], b: &[f64], matching: bool, margin: f64) -> Result<CosineMarginLoss> {
    let cosine = cosine_similarity(a, b)?;
    let (na, nb) = (super::norm(a), super::norm(b));
    let (loss, sign) = if matching {
        (1.0 - cosine, -1.0)
    } else if cosine > margin {
        (cosine - margin, 1.0)
    } else {
        (0.0, 0.0)
    };
    let (grad_a, grad_b) = if sign == 0.0 {
        (vec![0.0; a.len()], vec![0.0; b.len()])
    } else {
        let ga = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| sign * (y / (na * nb) - cosine * x / (na * na)))
            .collect();
        let gb = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| sign * (x / (na * nb) - cosine * y / (nb * nb)))
            .collect();
        (ga, gb)
    };
    Ok(CosineMarginLoss {
        loss,
        cosine,
        grad_a,
        grad_b,
    })
}
