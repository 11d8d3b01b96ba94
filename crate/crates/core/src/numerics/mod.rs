//! Small dense linear algebra, fully connected layers and the ADAM optimizer.
//!
//! Everything is `f64`; shapes are checked at runtime and mismatches surface as
//! [`Error::Dimension`](crate::Error::Dimension).

mod adam;
mod dense;
mod matrix;

pub use adam::{adam_step, AdamState};
pub use dense::{Activation, DenseGrads, DenseLayer};
pub use matrix::{matmul, Matrix};

/// Multi-step learning-rate decay: `base_lr * gamma^(#milestones <= epoch)`.
pub fn milestone_lr(base_lr: f64, epoch: usize, milestones: &[usize], gamma: f64) -> f64 {
    let passed = milestones.iter().filter(|&&m| m <= epoch).count();
    base_lr * gamma.powi(passed as i32)
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
