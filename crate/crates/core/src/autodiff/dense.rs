use rand::Rng;

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged matrix rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// Fully connected layer `y = W·x + b` with gradient buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub name: String,
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub grad_weight: Matrix,
    pub grad_bias: Vec<f64>,
}

impl Dense {
    /// Glorot-uniform weights in `±sqrt(6 / (in + out))`, zero bias.
    pub fn new<R: Rng>(name: impl Into<String>, input: usize, output: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (input + output) as f64).sqrt();
        let mut weight = Matrix::zeros(output, input);
        for w in &mut weight.data {
            *w = rng.gen_range(-limit..=limit);
        }
        Self::from_parts(name, weight, vec![0.0; output]).expect("shapes agree by construction")
    }

    pub fn from_parts(name: impl Into<String>, weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows {
            return Err(Error::DimMismatch {
                expected: weight.rows,
                actual: bias.len(),
            });
        }
        Ok(Self {
            name: name.into(),
            grad_weight: Matrix::zeros(weight.rows, weight.cols),
            grad_bias: vec![0.0; bias.len()],
            weight,
            bias,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok((0..self.output_dim())
            .map(|r| super::dot(self.weight.row(r), x) + self.bias[r])
            .collect())
    }

    /// Accumulates parameter gradients for `upstream = dL/dy` and returns `dL/dx`.
    pub fn backward(&mut self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        if upstream.len() != self.output_dim() {
            return Err(Error::DimMismatch {
                expected: self.output_dim(),
                actual: upstream.len(),
            });
        }
        let cols = self.input_dim();
        let mut dx = vec![0.0; cols];
        for (r, &g) in upstream.iter().enumerate() {
            self.grad_bias[r] += g;
            if g == 0.0 {
                continue;
            }
            let w = &self.weight.data[r * cols..(r + 1) * cols];
            let gw = &mut self.grad_weight.data[r * cols..(r + 1) * cols];
            for c in 0..cols {
                gw[c] += g * x[c];
                dx[c] += g * w[c];
            }
        }
        Ok(dx)
    }

    pub fn zero_grad(&mut self) {
        self.grad_weight.data.fill(0.0);
        self.grad_bias.fill(0.0);
    }

    pub fn param_count(&self) -> usize {
        self.weight.data.len() + self.bias.len()
    }
}

/// Models whose parameters all live in dense layers.
pub trait Parameterized {
    fn layers(&self) -> Vec<&Dense>;
    fn layers_mut(&mut self) -> Vec<&mut Dense>;

    fn zero_grad(&mut self) {
        for layer in self.layers_mut() {
            layer.zero_grad();
        }
    }

    fn scale_grad(&mut self, factor: f64) {
        for layer in self.layers_mut() {
            layer.grad_weight.data.iter_mut().for_each(|g| *g *= factor);
            layer.grad_bias.iter_mut().for_each(|g| *g *= factor);
        }
    }

    fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }
}

impl Parameterized for Dense {
    fn layers(&self) -> Vec<&Dense> {
        vec![self]
    }

    fn layers_mut(&mut self) -> Vec<&mut Dense> {
        vec![self]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{max_relative_error, numeric_gradient};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_passes_input_through() {
        let layer = Dense::from_parts("id", Matrix::identity(3), vec![0.0; 3]).unwrap();
        assert_eq!(layer.forward(&[1.0, -2.0, 3.5]).unwrap(), [1.0, -2.0, 3.5]);
    }

    #[test]
    fn hand_multiply() {
        let w = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let layer = Dense::from_parts("w", w, vec![0.0, 0.0]).unwrap();
        assert_eq!(layer.forward(&[1.0, 1.0]).unwrap(), [3.0, 7.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let mut layer = Dense::from_parts("w", Matrix::zeros(2, 3), vec![0.0; 2]).unwrap();
        assert!(layer.forward(&[1.0]).is_err());
        assert!(layer.backward(&[1.0, 2.0, 3.0], &[1.0]).is_err());
        assert!(Dense::from_parts("w", Matrix::zeros(2, 3), vec![0.0; 3]).is_err());
    }

    #[test]
    fn glorot_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = Dense::new("g", 10, 5, &mut rng);
        let limit = (6.0f64 / 15.0).sqrt();
        assert!(layer.weight.data.iter().all(|w| w.abs() <= limit));
        assert!(layer.bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut layer = Dense::new("r", 5, 8, &mut rng);
        for b in &mut layer.bias {
            *b = rng.gen_range(-1.0..1.0);
        }
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // L = c · (W x + b)
        let dx = layer.backward(&x, &c).unwrap();
        let num_dx = numeric_gradient(|x| crate::autodiff::dot(&c, &layer.forward(x).unwrap()), &x, 1e-5);
        assert!(max_relative_error(&dx, &num_dx) < 1e-4);
        let flat_w = layer.weight.data.clone();
        let analytic_w = layer.grad_weight.data.clone();
        let num_w = numeric_gradient(
            |w| {
                let l = Dense::from_parts("t", Matrix { rows: 8, cols: 5, data: w.to_vec() }, layer.bias.clone()).unwrap();
                crate::autodiff::dot(&c, &l.forward(&x).unwrap())
            },
            &flat_w,
            1e-5,
        );
        assert!(max_relative_error(&analytic_w, &num_w) < 1e-4);
        assert_eq!(layer.grad_bias, c);
    }
}
