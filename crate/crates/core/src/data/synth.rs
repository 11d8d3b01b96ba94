//! Synthetic scenes with a known set of informative bands.
//!
//! `k` planted bands carry independent signals. Every other band is a convex
//! mixture of two distinct planted bands plus Gaussian noise (with a single
//! planted band the mixture degenerates to a scaled copy), and the class label
//! is a linear argmax over the planted signals. No redundant band is a clean
//! stand-in for a planted one, so the `k` planted bands are the unique best
//! `k`-subset for reconstruction.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::HsiMatrix;
use crate::numerics::{sigmoid, Matrix};
use crate::{Error, Result};

pub const SYNTH_CLASSES: usize = 4;

/// AR(1) coefficient along pixel order; neighbouring pixels look alike.
const SMOOTHNESS: f64 = 0.9;

/// Smallest share either source takes in a two-source mixture.
const MIX_MIN: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub matrix: HsiMatrix,
    /// Planted band indices, ascending.
    pub planted: Vec<usize>,
}

pub fn synth_scene(
    d: usize,
    k_informative: usize,
    n: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<SyntheticScene> {
    if k_informative == 0 || k_informative >= d {
        return Err(Error::param(format!(
            "need 0 < k_informative < d, got k={k_informative}, d={d}"
        )));
    }
    if n == 0 {
        return Err(Error::param("need at least one pixel"));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::param(format!(
            "noise sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut planted = sample(&mut rng, d, k_informative).into_vec();
    planted.sort_unstable();

    // Mixing recipe for every band: list of (planted slot, weight).
    let mut recipe: Vec<Vec<(usize, f64)>> = vec![Vec::new(); d];
    for (slot, &band) in planted.iter().enumerate() {
        recipe[band] = vec![(slot, 1.0)];
    }
    for (band, mix) in recipe.iter_mut().enumerate() {
        if planted.binary_search(&band).is_ok() {
            continue;
        }
        let a = rng.random_range(0..k_informative);
        if k_informative > 1 {
            let mut b = rng.random_range(0..k_informative - 1);
            if b >= a {
                b += 1;
            }
            let w: f64 = rng.random_range(MIX_MIN..1.0 - MIX_MIN);
            *mix = vec![(a, w), (b, 1.0 - w)];
        } else {
            *mix = vec![(a, rng.random_range(0.5..1.0))];
        }
    }

    let class_weights: Vec<Vec<f64>> = (0..SYNTH_CLASSES)
        .map(|_| {
            (0..k_informative)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect()
        })
        .collect();

    let innovation = (1.0 - SMOOTHNESS * SMOOTHNESS).sqrt();
    let mut latent: Vec<f64> = (0..k_informative)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let noise = if noise_sigma > 0.0 {
        Some(Normal::new(0.0, noise_sigma).map_err(|e| Error::param(e.to_string()))?)
    } else {
        None
    };

    let mut values = Matrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    let mut signal = vec![0.0; k_informative];
    for i in 0..n {
        for (z, s) in latent.iter_mut().zip(signal.iter_mut()) {
            let eps: f64 = StandardNormal.sample(&mut rng);
            *z = SMOOTHNESS * *z + innovation * eps;
            *s = sigmoid(1.7 * *z);
        }
        let row = values.row_mut(i);
        for (band, mix) in recipe.iter().enumerate() {
            let clean: f64 = mix.iter().map(|&(slot, w)| w * signal[slot]).sum();
            let is_planted = mix.len() == 1 && mix[0].1 == 1.0;
            row[band] = match (&noise, is_planted) {
                (Some(dist), false) => (clean + dist.sample(&mut rng)).clamp(0.0, 1.0),
                _ => clean,
            };
        }
        let class = class_weights
            .iter()
            .map(|w| {
                w.iter()
                    .zip(&signal)
                    .map(|(a, s)| a * (s - 0.5))
                    .sum::<f64>()
            })
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (c, v)| {
                if v > best.1 {
                    (c, v)
                } else {
                    best
                }
            })
            .0;
        labels.push(class as u16 + 1);
    }

    Ok(SyntheticScene {
        matrix: HsiMatrix {
            values,
            labels,
            band_map: (0..d).collect(),
        },
        planted,
    })
}
