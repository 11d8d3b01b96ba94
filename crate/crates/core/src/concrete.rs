//! Binary-concrete gates, the Gumbel-softmax reference sampler, and the
//! exponential temperature schedule.
//!
//! The keep-probability of band `j` is `sigmoid(log_alpha[j])`; its dropout
//! rate is one minus that. As the temperature goes to zero a binary-concrete
//! sample becomes a Bernoulli draw with success probability `alpha / (1 + alpha)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::sigmoid;
use crate::{Error, Result};

/// Saturation bounds for gate samples. A sample pinned to a bound is flat in
/// `log_alpha`, so its slope is exactly zero (no subnormal gradients).
pub const GATE_MIN: f64 = 1e-12;
pub const GATE_MAX: f64 = 1.0 - 1e-12;

/// Learnable per-band log-odds of the selector layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorParams {
    pub log_alpha: Vec<f64>,
}

impl SelectorParams {
    /// All bands start at keep-probability 0.5.
    pub fn new(bands: usize) -> Self {
        Self {
            log_alpha: vec![0.0; bands],
        }
    }

    pub fn bands(&self) -> usize {
        self.log_alpha.len()
    }

    pub fn keep_probability(&self, band: usize) -> f64 {
        sigmoid(self.log_alpha[band])
    }

    pub fn dropout_rate(&self, band: usize) -> f64 {
        1.0 - self.keep_probability(band)
    }

    pub fn keep_probabilities(&self) -> Vec<f64> {
        self.log_alpha.iter().map(|&a| sigmoid(a)).collect()
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!(
            "temperature must be positive, got {tau}"
        )))
    }
}

/// Binary-concrete sample without the temperature check; `tau > 0` is the caller's job.
#[inline]
pub(crate) fn binary_concrete(log_alpha: f64, tau: f64, noise: f64) -> f64 {
    sigmoid((log_alpha + noise) / tau).clamp(GATE_MIN, GATE_MAX)
}

/// `X = 1 / (1 + exp(-(log_alpha + L) / tau))` for a given logistic noise `L`.
pub fn sample_binary_concrete(log_alpha: f64, tau: f64, logistic_noise: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(binary_concrete(log_alpha, tau, logistic_noise))
}

/// Slope of a gate sample with respect to its `log_alpha`: `X (1 - X) / tau`,
/// or zero when the sample sits on a saturation bound.
#[inline]
pub(crate) fn gate_slope(x: f64, tau: f64) -> f64 {
    if x <= GATE_MIN || x >= GATE_MAX {
        0.0
    } else {
        x * (1.0 - x) / tau
    }
}

/// `dX / d log_alpha = X (1 - X) / tau` evaluated at the same noise.
pub fn binary_concrete_grad(log_alpha: f64, tau: f64, logistic_noise: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(gate_slope(
        binary_concrete(log_alpha, tau, logistic_noise),
        tau,
    ))
}

/// Draws `u` from the open interval (0, 1).
#[inline]
fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Standard logistic noise `ln u - ln(1 - u)`.
#[inline]
pub fn logistic_noise<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u = open_uniform(rng);
    u.ln() - (1.0 - u).ln()
}

/// Standard Gumbel noise `-ln(-ln u)`.
#[inline]
pub fn gumbel_noise<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u = open_uniform(rng);
    -(-u.ln()).ln()
}

/// Gumbel-softmax (concrete) sample on the simplex. Reference only; the
/// selector layer uses independent binary gates.
pub fn sample_concrete_softmax(log_alphas: &[f64], tau: f64, gumbel: &[f64]) -> Result<Vec<f64>> {
    check_tau(tau)?;
    if log_alphas.len() != gumbel.len() {
        return Err(Error::Dimension {
            op: "sample_concrete_softmax",
            left: (log_alphas.len(), 1),
            right: (gumbel.len(), 1),
        });
    }
    let logits: Vec<f64> = log_alphas
        .iter()
        .zip(gumbel)
        .map(|(a, g)| (a + g) / tau)
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Named temperature presets: `(tau0, tau_c, epochs, batch)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchedulePreset {
    T1,
    T2,
    T3,
}

impl SchedulePreset {
    pub const ALL: [SchedulePreset; 3] =
        [SchedulePreset::T1, SchedulePreset::T2, SchedulePreset::T3];

    pub fn tau0(self) -> f64 {
        1.0
    }

    pub fn tau_c(self) -> f64 {
        match self {
            SchedulePreset::T1 | SchedulePreset::T2 => 0.001,
            SchedulePreset::T3 => 0.01,
        }
    }

    pub fn epochs(self) -> usize {
        match self {
            SchedulePreset::T1 => 40,
            SchedulePreset::T2 | SchedulePreset::T3 => 200,
        }
    }

    pub fn batch_size(self) -> usize {
        match self {
            SchedulePreset::T1 => 1,
            SchedulePreset::T2 => 256,
            SchedulePreset::T3 => 32,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SchedulePreset::T1 => "T1",
            SchedulePreset::T2 => "T2",
            SchedulePreset::T3 => "T3",
        }
    }
}

impl std::str::FromStr for SchedulePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "T1" => Ok(SchedulePreset::T1),
            "T2" => Ok(SchedulePreset::T2),
            "T3" => Ok(SchedulePreset::T3),
            other => Err(Error::param(format!("unknown schedule {other:?}"))),
        }
    }
}

/// Number of optimizer steps for `epochs` passes over `n` samples, keeping
/// the last partial batch.
pub fn steps_for(n: usize, epochs: usize, batch_size: usize) -> usize {
    epochs * n.div_ceil(batch_size)
}

/// Per-batch exponential decay from `tau0` to `tau_c` over `total_steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    tau0: f64,
    tau_c: f64,
    total_steps: usize,
    current_step: usize,
}

impl AnnealSchedule {
    pub fn new(tau0: f64, tau_c: f64, total_steps: usize) -> Result<Self> {
        if !(tau_c > 0.0 && tau0 >= tau_c && tau0.is_finite()) {
            return Err(Error::param(format!(
                "schedule needs tau0 >= tau_c > 0, got tau0={tau0}, tau_c={tau_c}"
            )));
        }
        if total_steps == 0 {
            return Err(Error::param("schedule needs at least one step"));
        }
        Ok(Self {
            tau0,
            tau_c,
            total_steps,
            current_step: 0,
        })
    }

    /// Schedule for a preset on a dataset of `n` samples.
    pub fn from_preset(preset: SchedulePreset, n: usize) -> Result<Self> {
        Self::new(
            preset.tau0(),
            preset.tau_c(),
            steps_for(n, preset.epochs(), preset.batch_size()),
        )
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    pub fn tau_c(&self) -> f64 {
        self.tau_c
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn current_step(&self) -> usize {
        self.current_step
    }

    /// `tau0 * (tau_c / tau0)^(step / total_steps)`.
    pub fn temperature_at(&self, step: usize) -> Result<f64> {
        if step > self.total_steps {
            return Err(Error::param(format!(
                "step {step} past schedule end {}",
                self.total_steps
            )));
        }
        let frac = step as f64 / self.total_steps as f64;
        Ok(self.tau0 * (self.tau_c / self.tau0).powf(frac))
    }

    pub fn current(&self) -> f64 {
        self.temperature_at(self.current_step)
            .expect("current step never passes the end")
    }

    /// Moves one step forward, saturating at the end.
    pub fn advance(&mut self) {
        self.current_step = (self.current_step + 1).min(self.total_steps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetric_point_is_half() {
        for tau in [0.01, 0.5, 1.0, 7.0] {
            assert_eq!(sample_binary_concrete(0.0, tau, 0.0).unwrap(), 0.5);
        }
        assert_eq!(sample_binary_concrete(2.0, 1.0, -2.0).unwrap(), 0.5);
    }

    #[test]
    fn grad_closed_forms() {
        assert_eq!(binary_concrete_grad(0.0, 1.0, 0.0).unwrap(), 0.25);
        assert_eq!(binary_concrete_grad(0.0, 0.5, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn nonpositive_tau_is_rejected() {
        assert!(sample_binary_concrete(0.0, 0.0, 0.0).is_err());
        assert!(binary_concrete_grad(0.0, -1.0, 0.0).is_err());
        assert!(sample_concrete_softmax(&[0.0], 0.0, &[0.0]).is_err());
    }

    #[test]
    fn saturated_gates_are_flat() {
        assert_eq!(sample_binary_concrete(3.0, 1e-3, 0.0).unwrap(), GATE_MAX);
        assert_eq!(binary_concrete_grad(3.0, 1e-3, 0.0).unwrap(), 0.0);
        assert_eq!(binary_concrete_grad(-3.0, 1e-3, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn samples_stay_inside_unit_interval() {
        for (a, n) in [(50.0, 10.0), (-50.0, -10.0), (0.3, 0.0)] {
            let x = sample_binary_concrete(a, 1e-3, n).unwrap();
            assert!(x > 0.0 && x < 1.0);
        }
    }

    #[test]
    fn low_temperature_limit_matches_odds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let alpha: f64 = 3.0;
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| {
                sample_binary_concrete(alpha.ln(), 0.01, logistic_noise(&mut rng)).unwrap() > 0.5
            })
            .count();
        let p = hits as f64 / n as f64;
        assert!((p - 0.75).abs() < 0.01, "{p}");
    }

    #[test]
    fn softmax_is_uniform_for_equal_logits() {
        let x = sample_concrete_softmax(&[0.4; 5], 0.3, &[0.0; 5]).unwrap();
        assert!(x.iter().all(|v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn softmax_sums_to_one_and_sharpens() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let la = [0.2, -1.0, 3.0, 0.0];
        for _ in 0..100 {
            let g: Vec<f64> = (0..4).map(|_| gumbel_noise(&mut rng)).collect();
            let x = sample_concrete_softmax(&la, 0.7, &g).unwrap();
            assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(x.iter().all(|&v| v >= 0.0));
        }
        let x = sample_concrete_softmax(&la, 0.01, &[0.0; 4]).unwrap();
        assert!(x[2] > 0.999);
    }

    #[test]
    fn schedule_endpoints_and_midpoint() {
        let s = AnnealSchedule::new(1.0, 0.001, 1000).unwrap();
        assert_eq!(s.temperature_at(0).unwrap(), 1.0);
        assert!((s.temperature_at(1000).unwrap() - 0.001).abs() < 1e-12);
        assert!((s.temperature_at(500).unwrap() - 0.001f64.sqrt()).abs() < 1e-12);
        assert!(s.temperature_at(1001).is_err());
    }

    #[test]
    fn schedule_rejects_bad_parameters() {
        assert!(AnnealSchedule::new(0.001, 1.0, 10).is_err());
        assert!(AnnealSchedule::new(1.0, 0.0, 10).is_err());
        assert!(AnnealSchedule::new(1.0, 0.1, 0).is_err());
    }

    #[test]
    fn advance_saturates() {
        let mut s = AnnealSchedule::new(1.0, 0.5, 2).unwrap();
        s.advance();
        s.advance();
        s.advance();
        assert_eq!(s.current_step(), 2);
        assert_eq!(s.current(), 0.5);
    }

    #[test]
    fn partial_batches_count_as_steps() {
        assert_eq!(steps_for(10, 3, 4), 9);
        assert_eq!(steps_for(8, 3, 4), 6);
        assert_eq!(steps_for(5, 40, 1), 200);
    }

    #[test]
    fn selector_probabilities() {
        let s = SelectorParams {
            log_alpha: vec![0.0, 3.0f64.ln()],
        };
        assert_eq!(s.keep_probability(0), 0.5);
        assert!((s.keep_probability(1) - 0.75).abs() < 1e-15);
        assert!((s.dropout_rate(1) - 0.25).abs() < 1e-15);
    }
}
