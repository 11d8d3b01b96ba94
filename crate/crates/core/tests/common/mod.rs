//! Oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use dcae::concrete::SchedulePreset;
use dcae::concrete::{
    binary_concrete_grad, logistic_noise, sample_binary_concrete, AnnealSchedule,
};
use dcae::data::{synth_scene, HsiCube};
use dcae::eval::ConfusionMatrix;
use dcae::model::{fit, loss_with, DropoutCae, ReconLoss, TrainConfig};
use dcae::numerics::{Activation, DenseLayer, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

/// Entries smaller than this are compared absolutely rather than relatively;
/// central differences at `FD_STEP` carry roughly 1e-11 of rounding noise.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect(),
    )
    .unwrap()
}

fn central<F: FnMut(f64) -> f64>(mut f: F, x: f64) -> f64 {
    (f(x + FD_STEP) - f(x - FD_STEP)) / (2.0 * FD_STEP)
}

/// Largest relative error of `DenseLayer::backward` against central
/// differences of the scalar `sum(upstream * forward(input))`.
pub fn dense_fd_error(rng: &mut impl Rng, activation: Activation) -> f64 {
    let (b, n_in, n_out) = (
        rng.random_range(1..=4),
        rng.random_range(1..=8),
        rng.random_range(1..=8),
    );
    let mut layer = DenseLayer::glorot(n_in, n_out, activation, rng);
    layer
        .bias
        .iter_mut()
        .for_each(|v| *v = rng.random_range(-0.5..0.5));
    let mut input = random_matrix(rng, b, n_in, -1.0, 1.0);
    // Keep ReLU preactivations away from the kink.
    if activation == Activation::Relu {
        while layer
            .preactivation(&input)
            .unwrap()
            .as_slice()
            .iter()
            .any(|z| z.abs() < 1e-3)
        {
            input = random_matrix(rng, b, n_in, -1.0, 1.0);
        }
    }
    let upstream = random_matrix(rng, b, n_out, -1.0, 1.0);
    let objective = |l: &DenseLayer, x: &Matrix| -> f64 {
        l.forward(x)
            .unwrap()
            .as_slice()
            .iter()
            .zip(upstream.as_slice())
            .map(|(a, u)| a * u)
            .sum()
    };
    let g = layer.backward(&input, &upstream).unwrap();
    let mut worst: f64 = 0.0;
    for idx in 0..layer.weights.as_slice().len() {
        let numeric = central(
            |v| {
                let mut l = layer.clone();
                l.weights.as_mut_slice()[idx] = v;
                objective(&l, &input)
            },
            layer.weights.as_slice()[idx],
        );
        worst = worst.max(rel_err(g.weights.as_slice()[idx], numeric));
    }
    for idx in 0..layer.bias.len() {
        let numeric = central(
            |v| {
                let mut l = layer.clone();
                l.bias[idx] = v;
                objective(&l, &input)
            },
            layer.bias[idx],
        );
        worst = worst.max(rel_err(g.bias[idx], numeric));
    }
    for idx in 0..input.as_slice().len() {
        let numeric = central(
            |v| {
                let mut x = input.clone();
                x.as_mut_slice()[idx] = v;
                objective(&layer, &x)
            },
            input.as_slice()[idx],
        );
        worst = worst.max(rel_err(g.input.as_slice()[idx], numeric));
    }
    worst
}

/// A small random model plus a batch and gate noise whose ReLU units all sit
/// clear of the kink.
pub struct ModelCase {
    pub model: DropoutCae,
    pub batch: Matrix,
    pub noise: Matrix,
    pub tau: f64,
}

pub fn model_case(rng: &mut ChaCha8Rng, kind: ReconLoss) -> ModelCase {
    loop {
        let (b, d, h) = (
            rng.random_range(1..=4),
            rng.random_range(1..=8),
            rng.random_range(2..=8),
        );
        let lambda = rng.random_range(0.0..0.1);
        let sched = AnnealSchedule::new(1.0, 0.1, 10).unwrap();
        let mut model = DropoutCae::new(d, h, sched, lambda, kind, rng).unwrap();
        model
            .selector
            .log_alpha
            .iter_mut()
            .for_each(|a| *a = rng.random_range(-2.0..2.0));
        model
            .hidden
            .bias
            .iter_mut()
            .for_each(|v| *v = rng.random_range(-0.3..0.3));
        model
            .output
            .bias
            .iter_mut()
            .for_each(|v| *v = rng.random_range(-0.3..0.3));
        let batch = random_matrix(rng, b, d, 0.0, 1.0);
        let noise =
            Matrix::from_vec(b, d, (0..b * d).map(|_| logistic_noise(rng)).collect()).unwrap();
        let tau = rng.random_range(0.5..2.0);
        let masks = model.sample_masks(&noise, tau).unwrap();
        let pre = model
            .hidden
            .preactivation(&batch.hadamard(&masks).unwrap())
            .unwrap();
        if pre.as_slice().iter().all(|z| z.abs() > 1e-3) {
            return ModelCase {
                model,
                batch,
                noise,
                tau,
            };
        }
    }
}

/// Loss recomputed through the public forward pass and the reference loss.
pub fn reference_loss(case: &ModelCase, model: &DropoutCae) -> f64 {
    let masks = model.sample_masks(&case.noise, case.tau).unwrap();
    let recon = model.forward(&case.batch, &masks).unwrap();
    loss_with(model.recon_loss, &case.batch, &recon, &masks, model.lambda)
        .unwrap()
        .total
}

/// Largest relative error of `DropoutCae::backward` over every parameter,
/// including the selector path through the sampled gates.
pub fn model_fd_error(case: &ModelCase) -> f64 {
    let (terms, g) = case
        .model
        .backward(&case.batch, &case.noise, case.tau)
        .unwrap();
    let mut worst = rel_err(terms.total, reference_loss(case, &case.model));

    let mut check = |analytic: &[f64], get: &dyn Fn(&mut DropoutCae) -> &mut [f64]| {
        for (idx, &a) in analytic.iter().enumerate() {
            let mut probe = case.model.clone();
            let x0 = get(&mut probe)[idx];
            let numeric = central(
                |v| {
                    get(&mut probe)[idx] = v;
                    reference_loss(case, &probe)
                },
                x0,
            );
            worst = worst.max(rel_err(a, numeric));
        }
    };
    check(&g.log_alpha, &|m| &mut m.selector.log_alpha);
    check(g.hidden_weights.as_slice(), &|m| {
        m.hidden.weights.as_mut_slice()
    });
    check(&g.hidden_bias, &|m| &mut m.hidden.bias);
    check(g.output_weights.as_slice(), &|m| {
        m.output.weights.as_mut_slice()
    });
    check(&g.output_bias, &|m| &mut m.output.bias);
    worst
}

/// Relative error of `binary_concrete_grad` against central differences of
/// the sample in `log_alpha`.
pub fn gate_fd_error(rng: &mut impl Rng) -> f64 {
    let a = rng.random_range(-3.0..3.0);
    let tau = rng.random_range(0.2..2.0);
    let l = logistic_noise(rng);
    let numeric = central(|v| sample_binary_concrete(v, tau, l).unwrap(), a);
    rel_err(binary_concrete_grad(a, tau, l).unwrap(), numeric)
}

/// Fraction of `n` gate samples above one half at temperature `tau`.
pub fn gate_open_fraction(alpha: f64, tau: f64, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_alpha = alpha.ln();
    let open = (0..n)
        .filter(|_| sample_binary_concrete(log_alpha, tau, logistic_noise(&mut rng)).unwrap() > 0.5)
        .count();
    open as f64 / n as f64
}

/// OA, AA and Kappa by walking every sample the matrix represents, one at a
/// time, with nothing but counters.
pub fn tally_metrics(counts: &[Vec<u64>]) -> (f64, f64, f64) {
    let c = counts.len();
    let mut total = 0u64;
    let mut correct = 0u64;
    let mut truth_n = vec![0u64; c];
    let mut pred_n = vec![0u64; c];
    let mut hit_n = vec![0u64; c];
    for (t, row) in counts.iter().enumerate() {
        for (p, &n) in row.iter().enumerate() {
            for _ in 0..n {
                total += 1;
                truth_n[t] += 1;
                pred_n[p] += 1;
                if t == p {
                    correct += 1;
                    hit_n[t] += 1;
                }
            }
        }
    }
    let oa = correct as f64 / total as f64;
    let recalls: Vec<f64> = (0..c)
        .filter(|&k| truth_n[k] > 0)
        .map(|k| hit_n[k] as f64 / truth_n[k] as f64)
        .collect();
    let aa = recalls.iter().sum::<f64>() / recalls.len() as f64;
    let t2 = (total as f64) * (total as f64);
    let pe = (0..c)
        .map(|k| truth_n[k] as f64 * pred_n[k] as f64)
        .sum::<f64>()
        / t2;
    let kappa = if (pe - 1.0).abs() < 1e-15 {
        0.0
    } else {
        (oa - pe) / (1.0 - pe)
    };
    (oa, aa, kappa)
}

pub fn random_confusion(rng: &mut impl Rng) -> ConfusionMatrix {
    let c = rng.random_range(2..=6);
    loop {
        let counts: Vec<Vec<u64>> = (0..c)
            .map(|_| {
                (0..c)
                    .map(|_| {
                        if rng.random_bool(0.3) {
                            0
                        } else {
                            rng.random_range(0..20)
                        }
                    })
                    .collect()
            })
            .collect();
        if counts.iter().flatten().sum::<u64>() > 0 {
            return ConfusionMatrix::from_counts((1..=c as u16).collect(), counts).unwrap();
        }
    }
}

/// Random cube, sometimes with labels, with finite and non-finite values alike.
pub fn random_cube(rng: &mut impl Rng, degenerate: bool) -> HsiCube {
    let (h, w, d) = if degenerate {
        (1, 1, 1)
    } else {
        (
            rng.random_range(1..=6),
            rng.random_range(1..=6),
            rng.random_range(1..=9),
        )
    };
    let values: Vec<f32> = (0..h * w * d)
        .map(|_| match rng.random_range(0..20) {
            0 => f32::NAN,
            1 => -0.0,
            2 => f32::INFINITY,
            3 => f32::from_bits(1), // smallest subnormal
            _ => rng.random_range(-1e4f32..1e4),
        })
        .collect();
    let labels = rng
        .random_bool(0.5)
        .then(|| (0..h * w).map(|_| rng.random::<u16>()).collect());
    HsiCube::new(h, w, d, values, labels).unwrap()
}

/// Planted bands found in the top-8 of a T1 run on the reference scene.
pub fn planted_hits(seed: u64) -> usize {
    let scene = synth_scene(60, 8, 4000, 0.05, seed).unwrap();
    let config = TrainConfig::from_preset(SchedulePreset::T1, 8, seed);
    let fitted = fit(&scene.matrix, &config).unwrap();
    fitted
        .subset
        .indices
        .iter()
        .filter(|i| scene.planted.contains(i))
        .count()
}
