//! Small differentiable-layer toolkit in `f64`: dense layers, activations,
//! the classification / regression / cosine-margin losses, SGD and Adam, a
//! finite-difference gradient checker and a tensor checkpoint container.

mod activation;
mod checkpoint;
mod dense;
mod gradcheck;
mod loss;
mod optim;

pub use activation::{l2_normalize, l2_normalize_backward, relu, relu_backward, tanh, tanh_backward};
pub use checkpoint::{Checkpoint, Tensor, CHECKPOINT_MAGIC};
pub use dense::{Dense, Matrix, Parameterized};
pub use gradcheck::{grad_check, max_relative_error, numeric_gradient, relative_error, GradCheckReport};
pub use loss::{cosine_margin_loss, cosine_similarity, cross_entropy, smooth_l1, softmax, CosineMarginLoss};
pub use optim::{Optimizer, OptimizerKind};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
