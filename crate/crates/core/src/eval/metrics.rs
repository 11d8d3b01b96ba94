//! Confusion matrices and OA / AA / Kappa.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Square count matrix, rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<u16>,
    pub counts: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
    /// Classes left out of AA for having no test samples.
    pub skipped_classes: usize,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<u16>) -> Self {
        let c = classes.len();
        Self {
            classes,
            counts: vec![vec![0; c]; c],
        }
    }

    pub fn from_counts(classes: Vec<u16>, counts: Vec<Vec<u64>>) -> Result<Self> {
        if counts.len() != classes.len() || counts.iter().any(|r| r.len() != classes.len()) {
            return Err(Error::Dimension {
                op: "ConfusionMatrix::from_counts",
                left: (counts.len(), counts.first().map_or(0, Vec::len)),
                right: (classes.len(), classes.len()),
            });
        }
        Ok(Self { classes, counts })
    }

    /// Tallies `(truth, prediction)` pairs; both must be in `classes`.
    pub fn from_predictions(classes: Vec<u16>, truth: &[u16], predicted: &[u16]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Dimension {
                op: "ConfusionMatrix::from_predictions",
                left: (truth.len(), 1),
                right: (predicted.len(), 1),
            });
        }
        let mut cm = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            let (ti, pi) = (cm.position(t)?, cm.position(p)?);
            cm.counts[ti][pi] += 1;
        }
        Ok(cm)
    }

    fn position(&self, class: u16) -> Result<usize> {
        self.classes
            .iter()
            .position(|&c| c == class)
            .ok_or_else(|| Error::data(format!("class {class} not in confusion matrix")))
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|k| self.counts[k][k]).sum()
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    pub fn col_sum(&self, k: usize) -> u64 {
        self.counts.iter().map(|r| r[k]).sum()
    }
}

/// OA = trace / total; AA = mean recall over classes with support;
/// Kappa = (p_o - p_e) / (1 - p_e), taken as 0 when p_e = 1.
pub fn metrics(conf: &ConfusionMatrix) -> Result<Scores> {
    let total = conf.total();
    if total == 0 {
        return Err(Error::data("confusion matrix is empty"));
    }
    let c = conf.classes.len();
    let n = total as f64;
    let oa = conf.trace() as f64 / n;

    let mut recall_sum = 0.0;
    let mut supported = 0usize;
    for k in 0..c {
        let support = conf.row_sum(k);
        if support > 0 {
            recall_sum += conf.counts[k][k] as f64 / support as f64;
            supported += 1;
        }
    }
    let aa = recall_sum / supported as f64;

    // p_e from integer marginals to keep the products exact.
    let chance: u128 = (0..c)
        .map(|k| conf.row_sum(k) as u128 * conf.col_sum(k) as u128)
        .sum();
    let pe = chance as f64 / (total as u128 * total as u128) as f64;
    let kappa = if chance == total as u128 * total as u128 {
        0.0
    } else {
        (oa - pe) / (1.0 - pe)
    };

    Ok(Scores {
        oa,
        aa,
        kappa,
        skipped_classes: c - supported,
    })
}
