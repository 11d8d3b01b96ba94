use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{select_bands, BandSubset, DropoutCae, Gradients, ReconLoss, DEFAULT_HIDDEN};
use crate::concrete::{logistic_noise, steps_for, AnnealSchedule, SchedulePreset};
use crate::data::HsiMatrix;
use crate::numerics::{adam_step, milestone_lr, AdamState, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub lr_milestones: Vec<usize>,
    pub lr_gamma: f64,
    pub lambda: f64,
    pub k: usize,
    pub seed: u64,
    pub tau0: f64,
    pub tau_c: f64,
    pub hidden: usize,
    pub recon_loss: ReconLoss,
}

impl TrainConfig {
    /// ADAM at 1e-3, decay x0.1 at epochs 15 and 30, lambda 0.005, 128 hidden units.
    pub fn from_preset(preset: SchedulePreset, k: usize, seed: u64) -> Self {
        Self {
            epochs: preset.epochs(),
            batch_size: preset.batch_size(),
            base_lr: 0.001,
            lr_milestones: vec![15, 30],
            lr_gamma: 0.1,
            lambda: 0.005,
            k,
            seed,
            tau0: preset.tau0(),
            tau_c: preset.tau_c(),
            hidden: DEFAULT_HIDDEN,
            recon_loss: ReconLoss::default(),
        }
    }

    pub fn validate(&self, bands: usize) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::param("epochs and batch size must be at least 1"));
        }
        if self.k == 0 || self.k > bands {
            return Err(Error::param(format!(
                "k must be in 1..={bands}, got {}",
                self.k
            )));
        }
        if !(self.base_lr > 0.0) || !(self.lr_gamma > 0.0) {
            return Err(Error::param("learning rate and gamma must be positive"));
        }
        if self.lr_milestones.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("lr milestones must be strictly increasing"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::param("lambda must be >= 0"));
        }
        if self.hidden == 0 {
            return Err(Error::param("hidden width must be positive"));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub recon_term: f64,
    pub reg_term: f64,
    pub lr: f64,
    /// Temperature reached at the end of the epoch.
    pub tau: f64,
    pub top_k: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub epochs: Vec<EpochRecord>,
    pub final_scores: Vec<f64>,
}

pub struct TrainedModel {
    pub model: DropoutCae,
    pub subset: BandSubset,
    pub trace: TrainingTrace,
}

struct Optimizer {
    log_alpha: AdamState,
    hidden_w: AdamState,
    hidden_b: AdamState,
    output_w: AdamState,
    output_b: AdamState,
}

impl Optimizer {
    fn new(model: &DropoutCae, lr: f64) -> Self {
        Self {
            log_alpha: AdamState::new(model.selector.log_alpha.len(), lr),
            hidden_w: AdamState::new(model.hidden.weights.as_slice().len(), lr),
            hidden_b: AdamState::new(model.hidden.bias.len(), lr),
            output_w: AdamState::new(model.output.weights.as_slice().len(), lr),
            output_b: AdamState::new(model.output.bias.len(), lr),
        }
    }

    fn set_lr(&mut self, lr: f64) {
        for s in [
            &mut self.log_alpha,
            &mut self.hidden_w,
            &mut self.hidden_b,
            &mut self.output_w,
            &mut self.output_b,
        ] {
            s.lr = lr;
        }
    }

    fn step(&mut self, model: &mut DropoutCae, g: &Gradients) -> Result<()> {
        adam_step(
            &mut model.selector.log_alpha,
            &g.log_alpha,
            &mut self.log_alpha,
        )?;
        adam_step(
            model.hidden.weights.as_mut_slice(),
            g.hidden_weights.as_slice(),
            &mut self.hidden_w,
        )?;
        adam_step(&mut model.hidden.bias, &g.hidden_bias, &mut self.hidden_b)?;
        adam_step(
            model.output.weights.as_mut_slice(),
            g.output_weights.as_slice(),
            &mut self.output_w,
        )?;
        adam_step(&mut model.output.bias, &g.output_bias, &mut self.output_b)?;
        Ok(())
    }
}

/// Trains on `data` and returns the selected bands with the per-epoch log.
pub fn train(data: &HsiMatrix, config: &TrainConfig) -> Result<(BandSubset, TrainingTrace)> {
    let out = fit(data, config)?;
    Ok((out.subset, out.trace))
}

/// Like [`train`], also returning the fitted model.
///
/// The run owns one ChaCha8 stream seeded from `config.seed`, consumed in a
/// fixed order: hidden weights, output weights, then per epoch a shuffle of
/// the sample order followed by one logistic draw per (sample, band) of each
/// batch, band index fastest.
pub fn fit(data: &HsiMatrix, config: &TrainConfig) -> Result<TrainedModel> {
    let (n, d) = (data.n(), data.d());
    if n == 0 || d == 0 {
        return Err(Error::data("training matrix is empty"));
    }
    config.validate(d)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let schedule = AnnealSchedule::new(
        config.tau0,
        config.tau_c,
        steps_for(n, config.epochs, config.batch_size),
    )?;
    let mut model = DropoutCae::new(
        d,
        config.hidden,
        schedule,
        config.lambda,
        config.recon_loss,
        &mut rng,
    )?;
    let mut opt = Optimizer::new(&model, config.base_lr);

    let mut order: Vec<usize> = (0..n).collect();
    let mut records = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let lr = milestone_lr(
            config.base_lr,
            epoch,
            &config.lr_milestones,
            config.lr_gamma,
        );
        opt.set_lr(lr);
        order.shuffle(&mut rng);

        let (mut loss, mut recon, mut reg) = (0.0, 0.0, 0.0);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = data.values.select_rows(chunk)?;
            let noise = Matrix::from_vec(
                chunk.len(),
                d,
                (0..chunk.len() * d)
                    .map(|_| logistic_noise(&mut rng))
                    .collect(),
            )?;
            let tau = model.schedule.current();
            let (terms, grads) = model.backward(&batch, &noise, tau)?;
            if !terms.total.is_finite() {
                return Err(Error::Training {
                    epoch,
                    batch: b,
                    msg: format!("non-finite loss {}", terms.total),
                });
            }
            let w = chunk.len() as f64 / n as f64;
            loss += w * terms.total;
            recon += w * terms.recon;
            reg += w * terms.reg;

            opt.step(&mut model, &grads)?;
            if model.selector.log_alpha.iter().any(|a| !a.is_finite()) {
                return Err(Error::Training {
                    epoch,
                    batch: b,
                    msg: "non-finite selector parameter".into(),
                });
            }
            model.schedule.advance();
        }

        records.push(EpochRecord {
            epoch,
            loss,
            recon_term: recon,
            reg_term: reg,
            lr,
            tau: model.schedule.current(),
            top_k: model.select(config.k)?.indices,
        });
    }

    let scores = model.selector.keep_probabilities();
    let subset = select_bands(&scores, config.k)?;
    Ok(TrainedModel {
        model,
        subset,
        trace: TrainingTrace {
            epochs: records,
            final_scores: scores,
        },
    })
}
