use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    ///
    /// For ReLU this is the subgradient 0 at the kink.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

/// Fully connected layer `y = act(x W^T + b)` with weights stored `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Gradients of a scalar loss with respect to one layer and its input.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub input: Matrix,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::Dimension {
                op: "DenseLayer::new",
                left: weights.shape(),
                right: (bias.len(), 1),
            });
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// Glorot-uniform weights in `±sqrt(6 / (in + out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        in_size: usize,
        out_size: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (in_size + out_size) as f64).sqrt();
        let data = (0..in_size * out_size)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self {
            weights: Matrix::from_vec(out_size, in_size, data).expect("length matches shape"),
            bias: vec![0.0; out_size],
            activation,
        }
    }

    #[inline]
    pub fn in_size(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn out_size(&self) -> usize {
        self.weights.rows()
    }

    /// `x W^T + b`, before the activation.
    pub fn preactivation(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.in_size() {
            return Err(Error::Dimension {
                op: "dense_forward",
                left: input.shape(),
                right: self.weights.shape(),
            });
        }
        let (n, out) = (input.rows(), self.out_size());
        let mut z = Matrix::zeros(n, out);
        for i in 0..n {
            let x = input.row(i);
            for (o, z_io) in z.row_mut(i).iter_mut().enumerate() {
                let w = self.weights.row(o);
                *z_io = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + self.bias[o];
            }
        }
        Ok(z)
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        let act = self.activation;
        let mut z = self.preactivation(input)?;
        z.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
        Ok(z)
    }

    /// Reverse-mode gradients given the layer input and `dL/dy`.
    pub fn backward(&self, input: &Matrix, upstream: &Matrix) -> Result<DenseGrads> {
        let output = self.forward(input)?;
        self.backward_from_output(input, &output, upstream)
    }

    /// Like [`backward`](Self::backward) but reuses an output already computed by `forward`.
    pub fn backward_from_output(
        &self,
        input: &Matrix,
        output: &Matrix,
        upstream: &Matrix,
    ) -> Result<DenseGrads> {
        if upstream.shape() != output.shape() {
            return Err(Error::Dimension {
                op: "dense_backward",
                left: upstream.shape(),
                right: output.shape(),
            });
        }
        let act = self.activation;
        let dz = Matrix::from_vec(
            upstream.rows(),
            upstream.cols(),
            upstream
                .as_slice()
                .iter()
                .zip(output.as_slice())
                .map(|(&u, &y)| u * act.derivative_from_output(y))
                .collect(),
        )?;
        self.backward_from_preactivation(input, &dz)
    }

    /// Gradients given `dL/dz`, the gradient with respect to the pre-activation.
    pub fn backward_from_preactivation(&self, input: &Matrix, dz: &Matrix) -> Result<DenseGrads> {
        let (n, out, inp) = (input.rows(), self.out_size(), self.in_size());
        if input.cols() != inp {
            return Err(Error::Dimension {
                op: "dense_backward",
                left: input.shape(),
                right: self.weights.shape(),
            });
        }
        if dz.shape() != (n, out) {
            return Err(Error::Dimension {
                op: "dense_backward",
                left: dz.shape(),
                right: (n, out),
            });
        }

        let mut grad_w = Matrix::zeros(out, inp);
        let mut grad_b = vec![0.0; out];
        let mut grad_in = Matrix::zeros(n, inp);
        for i in 0..n {
            let x = input.row(i);
            for (o, &g) in dz.row(i).iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grad_b[o] += g;
                for (gw, &xk) in grad_w.row_mut(o).iter_mut().zip(x) {
                    *gw += g * xk;
                }
                for (gi, &wk) in grad_in.row_mut(i).iter_mut().zip(self.weights.row(o)) {
                    *gi += g * wk;
                }
            }
        }
        Ok(DenseGrads {
            weights: grad_w,
            bias: grad_b,
            input: grad_in,
        })
    }
}
