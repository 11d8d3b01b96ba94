//! The dropout concrete autoencoder.
//!
//! A selector layer multiplies each band by a binary-concrete gate, a
//! two-layer decoder (ReLU hidden, sigmoid output) reconstructs all bands, and
//! the loss is a reconstruction term plus a sparsity penalty on the gates:
//!
//! ```text
//! L = (1/B) sum_ij r(x_ij, x_hat_ij) + (lambda/B) sum_ij m_ij
//! ```
//!
//! With `r = -x ln x_hat` ([`ReconLoss::CrossEntropy`], the form reported by
//! [`loss`]) the optimum is `x_hat = 1` regardless of input, so training uses
//! the full binary cross-entropy ([`ReconLoss::Bce`]) by default.
//!
//! Gradients are written out by hand; see [`DropoutCae::backward`].

mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::concrete::{binary_concrete, gate_slope, AnnealSchedule, SelectorParams};
use crate::numerics::{sigmoid, Activation, DenseLayer, Matrix};
use crate::{Error, Result};

pub use train::{fit, train, EpochRecord, TrainConfig, TrainedModel, TrainingTrace};

pub const DEFAULT_HIDDEN: usize = 128;

/// Reconstruction term of the loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconLoss {
    /// `-x ln(x_hat)` only. Minimised by `x_hat = 1` whatever the input, so
    /// it gives the selector no reason to keep any band open; kept for
    /// reporting and comparison.
    CrossEntropy,
    /// Full binary cross-entropy `-(x ln x_hat + (1 - x) ln(1 - x_hat))`.
    #[default]
    Bce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub total: f64,
    pub recon: f64,
    pub reg: f64,
}

/// Gradients of the loss with respect to every trainable parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub log_alpha: Vec<f64>,
    pub hidden_weights: Matrix,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Matrix,
    pub output_bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropoutCae {
    pub selector: SelectorParams,
    /// `d -> hidden`, ReLU.
    pub hidden: DenseLayer,
    /// `hidden -> d`, logistic sigmoid.
    pub output: DenseLayer,
    pub schedule: AnnealSchedule,
    pub lambda: f64,
    pub recon_loss: ReconLoss,
}

/// Selected bands plus the keep-probability of every band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSubset {
    pub k: usize,
    /// Ascending.
    pub indices: Vec<usize>,
    pub scores: Vec<f64>,
}

#[inline]
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

impl DropoutCae {
    pub fn new<R: Rng + ?Sized>(
        bands: usize,
        hidden: usize,
        schedule: AnnealSchedule,
        lambda: f64,
        recon_loss: ReconLoss,
        rng: &mut R,
    ) -> Result<Self> {
        if bands == 0 || hidden == 0 {
            return Err(Error::param("band and hidden widths must be positive"));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::param(format!("lambda must be >= 0, got {lambda}")));
        }
        let hidden_layer = DenseLayer::glorot(bands, hidden, Activation::Relu, rng);
        let output_layer = DenseLayer::glorot(hidden, bands, Activation::Sigmoid, rng);
        Ok(Self {
            selector: SelectorParams::new(bands),
            hidden: hidden_layer,
            output: output_layer,
            schedule,
            lambda,
            recon_loss,
        })
    }

    pub fn bands(&self) -> usize {
        self.selector.bands()
    }

    fn check_batch(&self, op: &'static str, batch: &Matrix, other: &Matrix) -> Result<()> {
        if batch.cols() != self.bands() || batch.shape() != other.shape() {
            return Err(Error::Dimension {
                op,
                left: batch.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    /// Gates for a `B x d` noise matrix at temperature `tau`.
    pub fn sample_masks(&self, noise: &Matrix, tau: f64) -> Result<Matrix> {
        if noise.cols() != self.bands() {
            return Err(Error::Dimension {
                op: "sample_masks",
                left: noise.shape(),
                right: (noise.rows(), self.bands()),
            });
        }
        if !(tau > 0.0) {
            return Err(Error::param(format!(
                "temperature must be positive, got {tau}"
            )));
        }
        let mut m = noise.clone();
        for i in 0..m.rows() {
            for (v, &a) in m.row_mut(i).iter_mut().zip(&self.selector.log_alpha) {
                *v = binary_concrete(a, tau, *v);
            }
        }
        Ok(m)
    }

    /// `x_hat = decoder(batch * masks)`.
    pub fn forward(&self, batch: &Matrix, masks: &Matrix) -> Result<Matrix> {
        self.check_batch("forward", batch, masks)?;
        let gated = batch.hadamard(masks)?;
        let h = self.hidden.forward(&gated)?;
        self.output.forward(&h)
    }

    /// Loss terms and all parameter gradients for one batch.
    ///
    /// Masks are rebuilt from `noise` at temperature `tau` so the gradient
    /// flows through the gates into `log_alpha` along both the reconstruction
    /// and the regularizer paths.
    pub fn backward(
        &self,
        batch: &Matrix,
        noise: &Matrix,
        tau: f64,
    ) -> Result<(LossTerms, Gradients)> {
        self.check_batch("backward", batch, noise)?;
        let masks = self.sample_masks(noise, tau)?;
        let b = batch.rows().max(1) as f64;

        let gated = batch.hadamard(&masks)?;
        let h = self.hidden.forward(&gated)?;
        let z = self.output.preactivation(&h)?;

        // dL/dz at the output logits, and the loss computed from the same logits.
        let mut dz = Matrix::zeros(z.rows(), z.cols());
        let mut recon = 0.0;
        for ((g, &zi), &x) in dz
            .as_mut_slice()
            .iter_mut()
            .zip(z.as_slice())
            .zip(batch.as_slice())
        {
            let xh = sigmoid(zi);
            match self.recon_loss {
                ReconLoss::CrossEntropy => {
                    recon += x * softplus(-zi);
                    *g = -x * (1.0 - xh) / b;
                }
                ReconLoss::Bce => {
                    recon += x * softplus(-zi) + (1.0 - x) * softplus(zi);
                    *g = (xh - x) / b;
                }
            }
        }
        let recon = recon / b;
        let reg = self.lambda * masks.as_slice().iter().sum::<f64>() / b;

        let out_grads = self.output.backward_from_preactivation(&h, &dz)?;
        let hid_grads = self
            .hidden
            .backward_from_output(&gated, &h, &out_grads.input)?;

        let reg_grad = self.lambda / b;
        let mut log_alpha = vec![0.0; self.bands()];
        for i in 0..batch.rows() {
            let x = batch.row(i);
            let m = masks.row(i);
            let du = hid_grads.input.row(i);
            for j in 0..self.bands() {
                let dm = du[j] * x[j] + reg_grad;
                log_alpha[j] += dm * gate_slope(m[j], tau);
            }
        }

        Ok((
            LossTerms {
                total: recon + reg,
                recon,
                reg,
            },
            Gradients {
                log_alpha,
                hidden_weights: hid_grads.weights,
                hidden_bias: hid_grads.bias,
                output_weights: out_grads.weights,
                output_bias: out_grads.bias,
            },
        ))
    }

    /// Current top-`k` bands by keep-probability.
    pub fn select(&self, k: usize) -> Result<BandSubset> {
        select_bands(&self.selector.keep_probabilities(), k)
    }
}

/// `-(1/B) sum x ln x_hat` and `(lambda/B) sum m`, natural log.
pub fn loss(
    batch: &Matrix,
    reconstruction: &Matrix,
    masks: &Matrix,
    lambda: f64,
) -> Result<LossTerms> {
    loss_with(
        ReconLoss::CrossEntropy,
        batch,
        reconstruction,
        masks,
        lambda,
    )
}

pub fn loss_with(
    kind: ReconLoss,
    batch: &Matrix,
    reconstruction: &Matrix,
    masks: &Matrix,
    lambda: f64,
) -> Result<LossTerms> {
    if batch.shape() != reconstruction.shape() || batch.shape() != masks.shape() {
        return Err(Error::Dimension {
            op: "loss",
            left: batch.shape(),
            right: reconstruction.shape(),
        });
    }
    let b = batch.rows().max(1) as f64;
    let mut recon = 0.0;
    for (&x, &xh) in batch.as_slice().iter().zip(reconstruction.as_slice()) {
        let in_domain = match kind {
            ReconLoss::CrossEntropy => xh > 0.0 && xh <= 1.0,
            ReconLoss::Bce => xh > 0.0 && xh < 1.0,
        };
        if !in_domain {
            return Err(Error::Domain(format!(
                "reconstruction value {xh} outside the log domain"
            )));
        }
        recon -= match kind {
            ReconLoss::CrossEntropy => x * xh.ln(),
            ReconLoss::Bce => x * xh.ln() + (1.0 - x) * (1.0 - xh).ln(),
        };
    }
    let recon = recon / b;
    let reg = lambda * masks.as_slice().iter().sum::<f64>() / b;
    Ok(LossTerms {
        total: recon + reg,
        recon,
        reg,
    })
}

/// The `k` highest-scoring bands; ties go to the lower index. Output ascending.
pub fn select_bands(scores: &[f64], k: usize) -> Result<BandSubset> {
    if k == 0 || k > scores.len() {
        return Err(Error::param(format!(
            "k must be in 1..={}, got {k}",
            scores.len()
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::param(format!("score {bad} outside [0, 1]")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut indices = order[..k].to_vec();
    indices.sort_unstable();
    Ok(BandSubset {
        k,
        indices,
        scores: scores.to_vec(),
    })
}
