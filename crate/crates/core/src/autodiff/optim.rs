use serde::{Deserialize, Serialize};

use super::dense::Parameterized;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    SgdMomentum {
        learning_rate: f64,
        momentum: f64,
    },
    Adam {
        learning_rate: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl OptimizerKind {
    pub fn sgd(learning_rate: f64, momentum: f64) -> Self {
        OptimizerKind::SgdMomentum {
            learning_rate,
            momentum,
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        OptimizerKind::Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Optimizer with one slot per parameter tensor, allocated on first use.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One update over explicit parameter / gradient slices.
    pub fn step_slices(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::DimMismatch {
                expected: params.len(),
                actual: grads.len(),
            });
        }
        self.begin(params.iter().map(|p| p.len()).collect())?;
        for (slot, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(Error::DimMismatch {
                    expected: p.len(),
                    actual: g.len(),
                });
            }
            self.update(slot, p, g);
        }
        Ok(())
    }

    /// One update over every layer of `model` using its gradient buffers.
    pub fn step<M: Parameterized + ?Sized>(&mut self, model: &mut M) -> Result<()> {
        let shapes = model
            .layers()
            .iter()
            .flat_map(|l| [l.weight.data.len(), l.bias.len()])
            .collect();
        self.begin(shapes)?;
        for (i, layer) in model.layers_mut().into_iter().enumerate() {
            self.update(2 * i, &mut layer.weight.data, &layer.grad_weight.data);
            self.update(2 * i + 1, &mut layer.bias, &layer.grad_bias);
        }
        Ok(())
    }

    fn begin(&mut self, shapes: Vec<usize>) -> Result<()> {
        if self.first.is_empty() {
            self.first = shapes.iter().map(|&n| vec![0.0; n]).collect();
            self.second = shapes.iter().map(|&n| vec![0.0; n]).collect();
        } else if self.first.len() != shapes.len()
            || self.first.iter().zip(&shapes).any(|(s, &n)| s.len() != n)
        {
            return Err(Error::InvalidArgument(
                "parameter shapes changed between optimizer steps".into(),
            ));
        }
        self.steps += 1;
        Ok(())
    }

    fn update(&mut self, slot: usize, params: &mut [f64], grads: &[f64]) {
        match self.kind {
            OptimizerKind::SgdMomentum {
                learning_rate,
                momentum,
            } => {
                let v = &mut self.first[slot];
                for ((p, g), v) in params.iter_mut().zip(grads).zip(v.iter_mut()) {
                    *v = momentum * *v + g;
                    *p -= learning_rate * *v;
                }
            }
            OptimizerKind::Adam {
                learning_rate,
                beta1,
                beta2,
                epsilon,
            } => {
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let (m, v) = (&mut self.first[slot], &mut self.second[slot]);
                for i in 0..params.len() {
                    let g = grads[i];
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    params[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(opt: &mut Optimizer, theta: &mut f64, g: f64) {
        let mut p = [*theta];
        opt.step_slices(&mut [&mut p[..]], &[&[g][..]]).unwrap();
        *theta = p[0];
    }

    #[test]
    fn plain_sgd() {
        let mut opt = Optimizer::new(OptimizerKind::sgd(0.1, 0.0));
        let mut theta = 1.0;
        step(&mut opt, &mut theta, 1.0);
        assert!((theta - 0.9).abs() < 1e-15);
    }

    #[test]
    fn momentum_unrolls() {
        let mut opt = Optimizer::new(OptimizerKind::sgd(0.1, 0.9));
        let mut theta = 2.0;
        step(&mut opt, &mut theta, 1.0);
        step(&mut opt, &mut theta, 1.0);
        assert!((theta - (2.0 - 0.1 * (1.0 + 1.9))).abs() < 1e-12);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut opt = Optimizer::new(OptimizerKind::adam(1e-3));
        let mut theta = 0.5;
        step(&mut opt, &mut theta, 1.0);
        let expected = 0.5 - 1e-3 * (1.0 / (1.0 + 1e-8));
        assert!((theta - expected).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let mut opt = Optimizer::new(OptimizerKind::sgd(0.1, 0.0));
        let mut p = [1.0, 2.0];
        assert!(opt.step_slices(&mut [&mut p[..]], &[&[1.0][..]]).is_err());
        let mut opt = Optimizer::new(OptimizerKind::sgd(0.1, 0.0));
        opt.step_slices(&mut [&mut p[..]], &[&[1.0, 1.0][..]]).unwrap();
        let mut q = [1.0];
        assert!(opt.step_slices(&mut [&mut q[..]], &[&[1.0][..]]).is_err());
    }
}
