//! Downstream evaluation of a band subset.
//!
//! A subset is scored by repeatedly splitting the labeled pixels, training a
//! linear SVM on the selected bands, and computing OA, AA and Kappa on the
//! held-out part. Band entropy is reported alongside for plotting.

mod metrics;
mod svm;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split, HsiMatrix, SplitSpec};
use crate::model::BandSubset;
use crate::{Error, Result};

pub use metrics::{metrics, ConfusionMatrix, Scores};
pub use svm::{train_linear_svm, LinearSvm, SvmConfig};

pub const DEFAULT_BINS: usize = 256;

/// Shannon entropy (bits) of an equal-width histogram of `values` on [0, 1].
pub fn entropy_of(values: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::param(format!("need at least 2 bins, got {bins}")));
    }
    if values.is_empty() {
        return Ok(0.0);
    }
    let mut hist = vec![0u64; bins];
    for &v in values {
        let b = ((v.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        hist[b] += 1;
    }
    let n = values.len() as f64;
    Ok(hist
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum())
}

pub fn band_entropy(matrix: &HsiMatrix, band: usize, bins: usize) -> Result<f64> {
    if band >= matrix.d() {
        return Err(Error::param(format!(
            "band {band} out of range for {} bands",
            matrix.d()
        )));
    }
    entropy_of(&matrix.band(band), bins)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunScores {
    pub seed: u64,
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
    pub skipped_classes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub runs: Vec<RunScores>,
    pub mean: MetricSummary,
    /// Sample standard deviation across runs (0 for a single run).
    pub std: MetricSummary,
    pub subset: BandSubset,
    pub entropy_bins: usize,
    pub entropies: Vec<f64>,
}

impl EvalReport {
    /// Checks every metric against its legal range.
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let ok = self
            .runs
            .iter()
            .map(|r| (r.oa, r.aa, r.kappa))
            .chain(std::iter::once((
                self.mean.oa,
                self.mean.aa,
                self.mean.kappa,
            )))
            .all(|(oa, aa, k)| unit(oa) && unit(aa) && (-1.0..=1.0).contains(&k));
        if ok {
            Ok(())
        } else {
            Err(Error::data("evaluation metric outside its legal range"))
        }
    }
}

/// Per-band row of the plotting table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub band: usize,
    pub original_band: usize,
    pub entropy: f64,
    pub selected: bool,
    pub keep_probability: f64,
}

pub fn band_table(report: &EvalReport, band_map: &[usize]) -> Vec<BandRow> {
    report
        .entropies
        .iter()
        .enumerate()
        .map(|(j, &entropy)| BandRow {
            band: j,
            original_band: band_map.get(j).copied().unwrap_or(j),
            entropy,
            selected: report.subset.indices.binary_search(&j).is_ok(),
            keep_probability: report.subset.scores.get(j).copied().unwrap_or(f64::NAN),
        })
        .collect()
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    let mean = values.clone().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

fn evaluate_once(
    matrix: &HsiMatrix,
    subset: &BandSubset,
    spec: &SplitSpec,
    svm: &SvmConfig,
) -> Result<RunScores> {
    let (train_idx, test_idx) = split(&matrix.labels, spec)?;
    let features = matrix.values.select_columns(&subset.indices)?;
    let train_x = features.select_rows(&train_idx)?;
    let train_y: Vec<u16> = train_idx.iter().map(|&i| matrix.labels[i]).collect();
    let model = train_linear_svm(
        &train_x,
        &train_y,
        &SvmConfig {
            seed: spec.seed,
            ..*svm
        },
    )?;

    let test_x = features.select_rows(&test_idx)?;
    let truth: Vec<u16> = test_idx.iter().map(|&i| matrix.labels[i]).collect();
    let predicted = model.predict(&test_x)?;
    let conf = ConfusionMatrix::from_predictions(matrix.classes(), &truth, &predicted)?;
    let s = metrics(&conf)?;
    Ok(RunScores {
        seed: spec.seed,
        oa: s.oa,
        aa: s.aa,
        kappa: s.kappa,
        skipped_classes: s.skipped_classes,
    })
}

/// Runs the split / train / score protocol `runs` times with seeds
/// `spec.seed, spec.seed + 1, ...`. Runs execute in parallel; the report
/// lists them in seed order.
pub fn evaluate_subset(
    matrix: &HsiMatrix,
    subset: &BandSubset,
    runs: usize,
    spec: &SplitSpec,
    svm: &SvmConfig,
    bins: usize,
) -> Result<EvalReport> {
    if runs == 0 {
        return Err(Error::param("need at least one evaluation run"));
    }
    if let Some(&bad) = subset.indices.iter().find(|&&j| j >= matrix.d()) {
        return Err(Error::data(format!(
            "subset band {bad} out of range for a scene with {} bands",
            matrix.d()
        )));
    }
    if subset.indices.is_empty() {
        return Err(Error::param("subset is empty"));
    }
    spec.validate()?;

    let per_run = (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            let run_spec = SplitSpec {
                seed: spec.seed.wrapping_add(r),
                ..*spec
            };
            evaluate_once(matrix, subset, &run_spec, svm)
        })
        .collect::<Result<Vec<_>>>()?;

    let entropies = (0..matrix.d())
        .into_par_iter()
        .map(|j| band_entropy(matrix, j, bins))
        .collect::<Result<Vec<_>>>()?;

    let (oa, oa_sd) = mean_std(per_run.iter().map(|r| r.oa));
    let (aa, aa_sd) = mean_std(per_run.iter().map(|r| r.aa));
    let (kappa, kappa_sd) = mean_std(per_run.iter().map(|r| r.kappa));
    let report = EvalReport {
        runs: per_run,
        mean: MetricSummary { oa, aa, kappa },
        std: MetricSummary {
            oa: oa_sd,
            aa: aa_sd,
            kappa: kappa_sd,
        },
        subset: subset.clone(),
        entropy_bins: bins,
        entropies,
    };
    report.validate()?;
    Ok(report)
}
