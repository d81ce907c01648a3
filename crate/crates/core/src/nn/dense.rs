use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: &mut Matrix) {
        match self {
            Activation::Identity => {}
            Activation::Relu => {
                for v in z.data_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            Activation::Tanh => {
                for v in z.data_mut() {
                    *v = v.tanh();
                }
            }
        }
    }

    /// Derivative expressed through the post-activation value.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Fully connected layer operating on row-major batches (batch x features).
#[derive(Clone, Debug)]
pub struct DenseLayer {
    pub w: Matrix, // input_dim x output_dim
    pub b: Vec<f64>,
    pub act: Activation,
}

/// Values a dense backward pass needs from the matching forward pass.
#[derive(Clone, Debug)]
pub struct DenseCache {
    pub x: Matrix,
    pub y: Matrix,
}

#[derive(Clone, Debug)]
pub struct DenseGrads {
    pub dw: Matrix,
    pub db: Vec<f64>,
}

impl DenseLayer {
    pub fn new(input: usize, output: usize, act: Activation, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let data = (0..input * output)
            .map(|_| rng.uniform_range((-bound, bound)))
            .collect();
        DenseLayer {
            w: Matrix::from_vec(input, output, data),
            b: vec![0.0; output],
            act,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, DenseCache)> {
        if x.cols() != self.w.rows() {
            return Err(Error::Dimension(format!(
                "dense forward: input has {} features, layer expects {}",
                x.cols(),
                self.w.rows()
            )));
        }
        let mut y = x.matmul(&self.w);
        for r in 0..y.rows() {
            let row = y.row_mut(r);
            for (v, b) in row.iter_mut().zip(self.b.iter()) {
                *v += b;
            }
        }
        self.act.apply(&mut y);
        let cache = DenseCache {
            x: x.clone(),
            y: y.clone(),
        };
        Ok((y, cache))
    }

    /// Accumulates parameter gradients into `grads` and returns dL/dx.
    pub fn backward_acc(
        &self,
        cache: &DenseCache,
        dy: &Matrix,
        grads: &mut DenseGrads,
    ) -> Result<Matrix> {
        if dy.rows() != cache.y.rows() || dy.cols() != cache.y.cols() {
            return Err(Error::Dimension(
                "dense backward: upstream shape mismatch".into(),
            ));
        }
        let mut dz = dy.clone();
        for (g, y) in dz.data_mut().iter_mut().zip(cache.y.data().iter()) {
            *g *= self.act.derivative_from_output(*y);
        }
        grads.dw.matmul_acc(1.0, &cache.x.transpose(), &dz);
        for r in 0..dz.rows() {
            for (acc, g) in grads.db.iter_mut().zip(dz.row(r).iter()) {
                *acc += g;
            }
        }
        Ok(dz.matmul(&self.w.transpose()))
    }

    pub fn zero_grads(&self) -> DenseGrads {
        DenseGrads {
            dw: Matrix::zeros(self.w.rows(), self.w.cols()),
            db: vec![0.0; self.b.len()],
        }
    }

    pub fn param_count(&self) -> usize {
        self.w.rows() * self.w.cols() + self.b.len()
    }
}
