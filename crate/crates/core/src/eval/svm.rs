//! One-vs-rest linear SVM trained with averaged SGD on the hinge loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub epochs: usize,
    /// Initial step size; decays as `lr / (1 + lr * reg * t)`.
    pub lr: f64,
    /// L2 penalty on the weights (not the bias).
    pub reg: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            lr: 0.05,
            reg: 1e-4,
            seed: 0,
        }
    }
}

/// Per-class linear scorers over standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub classes: Vec<u16>,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

fn standardizer(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let (n, f) = x.shape();
    let mut mean = vec![0.0; f];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(x.row(i)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; f];
    for i in 0..n {
        for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let scale = var
        .into_iter()
        .map(|s| {
            let sd = (s / n as f64).sqrt();
            if sd > 1e-12 {
                1.0 / sd
            } else {
                0.0
            }
        })
        .collect();
    (mean, scale)
}

impl LinearSvm {
    fn standardize(&self, row: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(row).zip(&self.mean).zip(&self.scale) {
            *o = (v - m) * s;
        }
    }

    pub fn features(&self) -> usize {
        self.mean.len()
    }

    pub fn decision(&self, row: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.features()];
        self.standardize(row, &mut z);
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(&z).map(|(a, x)| a * x).sum::<f64>() + b)
            .collect()
    }

    /// Highest-scoring class; ties go to the earlier class.
    pub fn predict_row(&self, row: &[f64]) -> u16 {
        let scores = self.decision(row);
        let mut best = 0;
        for (c, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = c;
            }
        }
        self.classes[best]
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<u16>> {
        if x.cols() != self.features() {
            return Err(Error::Dimension {
                op: "LinearSvm::predict",
                left: x.shape(),
                right: (x.rows(), self.features()),
            });
        }
        Ok((0..x.rows()).map(|i| self.predict_row(x.row(i))).collect())
    }
}

pub fn train_linear_svm(
    features: &Matrix,
    labels: &[u16],
    config: &SvmConfig,
) -> Result<LinearSvm> {
    let (n, f) = features.shape();
    if n != labels.len() {
        return Err(Error::Dimension {
            op: "train_linear_svm",
            left: features.shape(),
            right: (labels.len(), 1),
        });
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::data("classifier needs at least two classes"));
    }
    if config.epochs == 0 || !(config.lr > 0.0) || !(config.reg >= 0.0) {
        return Err(Error::param("SVM needs epochs >= 1, lr > 0, reg >= 0"));
    }

    let (mean, scale) = standardizer(features);
    let mut svm = LinearSvm {
        classes: classes.clone(),
        weights: vec![vec![0.0; f]; classes.len()],
        bias: vec![0.0; classes.len()],
        mean,
        scale,
    };
    let mut x = Matrix::zeros(n, f);
    for i in 0..n {
        svm.standardize(features.row(i), x.row_mut(i));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut w = vec![vec![0.0; f]; classes.len()];
    let mut b = vec![0.0; classes.len()];
    let avg_from = if config.epochs > 1 { n } else { 0 };
    let mut averaged = 0usize;
    let mut t = 0usize;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = config.lr / (1.0 + config.lr * config.reg * t as f64);
            let xi = x.row(i);
            for (c, &class) in classes.iter().enumerate() {
                let y = if labels[i] == class { 1.0 } else { -1.0 };
                let wc = &mut w[c];
                let margin = y * (wc.iter().zip(xi).map(|(a, v)| a * v).sum::<f64>() + b[c]);
                let shrink = 1.0 - eta * config.reg;
                if margin < 1.0 {
                    for (a, v) in wc.iter_mut().zip(xi) {
                        *a = *a * shrink + eta * y * v;
                    }
                    b[c] += eta * y;
                } else {
                    wc.iter_mut().for_each(|a| *a *= shrink);
                }
            }
            t += 1;
            if t > avg_from {
                averaged += 1;
                let step = 1.0 / averaged as f64;
                for c in 0..classes.len() {
                    for (avg, cur) in svm.weights[c].iter_mut().zip(&w[c]) {
                        *avg += (cur - *avg) * step;
                    }
                    svm.bias[c] += (b[c] - svm.bias[c]) * step;
                }
            }
        }
    }
    Ok(svm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(n: usize, seed: u64) -> (Matrix, Vec<u16>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let class = (i % 2) as u16 + 1;
            let center = if class == 1 { -3.0 } else { 3.0 };
            let e1: f64 = StandardNormal.sample(&mut rng);
            let e2: f64 = StandardNormal.sample(&mut rng);
            rows.push(vec![center + 0.5 * e1, 0.5 * e2]);
            labels.push(class);
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn separable_blobs_fit_perfectly() {
        let (x, y) = blobs(200, 1);
        let svm = train_linear_svm(&x, &y, &SvmConfig::default()).unwrap();
        assert_eq!(svm.predict(&x).unwrap(), y);
    }

    #[test]
    fn shuffled_labels_are_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 4000;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
            .collect();
        let labels: Vec<u16> = (0..n)
            .map(|_| if rng.random_bool(0.5) { 1 } else { 2 })
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let train_idx: Vec<usize> = (0..1000).collect();
        let test_idx: Vec<usize> = (1000..n).collect();
        let svm = train_linear_svm(
            &x.select_rows(&train_idx).unwrap(),
            &labels[..1000],
            &SvmConfig::default(),
        )
        .unwrap();
        let pred = svm.predict(&x.select_rows(&test_idx).unwrap()).unwrap();
        let acc = pred
            .iter()
            .zip(&labels[1000..])
            .filter(|(a, b)| a == b)
            .count() as f64
            / 3000.0;
        assert!((acc - 0.5).abs() < 0.05, "{acc}");
    }

    #[test]
    fn same_data_order_and_steps_give_identical_weights() {
        let (x, y) = blobs(100, 3);
        let cfg = SvmConfig {
            seed: 11,
            ..SvmConfig::default()
        };
        let a = train_linear_svm(&x, &y, &cfg).unwrap();
        let b = train_linear_svm(&x, &y, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = Matrix::zeros(4, 2);
        assert!(matches!(
            train_linear_svm(&x, &[1, 1, 1, 1], &SvmConfig::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn constant_feature_is_ignored() {
        let (x, y) = blobs(100, 4);
        let rows: Vec<Vec<f64>> = (0..x.rows()).map(|i| vec![x[(i, 0)], 7.0]).collect();
        let x2 = Matrix::from_rows(&rows).unwrap();
        let svm = train_linear_svm(&x2, &y, &SvmConfig::default()).unwrap();
        assert!(svm.weights.iter().all(|w| w[1] == 0.0));
        assert_eq!(svm.predict(&x2).unwrap(), y);
    }
}
