use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How to split labeled samples into train and test sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.1,
            stratified: true,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::param(format!(
                "train fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

fn train_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1))
}

/// Returns `(train, test)` row indices, each ascending. Deterministic in `spec.seed`.
///
/// Stratified splits draw `round(fraction * n_c)` training rows from every
/// class, clamped so each class keeps at least one row on both sides.
pub fn split(labels: &[u16], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    if labels.len() < 2 {
        return Err(Error::data("need at least two samples to split"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();

    if spec.stratified {
        let mut by_class: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
        for (i, &l) in labels.iter().enumerate() {
            by_class.entry(l).or_default().push(i);
        }
        for (class, mut idx) in by_class {
            if idx.len() < 2 {
                return Err(Error::data(format!(
                    "class {class} has {} sample(s); stratified split needs at least 2",
                    idx.len()
                )));
            }
            idx.shuffle(&mut rng);
            train.extend_from_slice(&idx[..train_count(idx.len(), spec.train_fraction)]);
        }
    } else {
        let mut idx: Vec<usize> = (0..labels.len()).collect();
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..train_count(idx.len(), spec.train_fraction)]);
    }

    train.sort_unstable();
    let mut in_train = vec![false; labels.len()];
    for &i in &train {
        in_train[i] = true;
    }
    let test = (0..labels.len()).filter(|&i| !in_train[i]).collect();
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(fraction: f64, stratified: bool, seed: u64) -> SplitSpec {
        SplitSpec {
            train_fraction: fraction,
            stratified,
            seed,
        }
    }

    #[test]
    fn plain_ten_percent() {
        let labels = vec![1u16; 100];
        let (tr, te) = split(&labels, &spec(0.1, false, 3)).unwrap();
        assert_eq!((tr.len(), te.len()), (10, 90));
    }

    #[test]
    fn stratified_per_class() {
        let labels: Vec<u16> = (0..100).map(|i| if i < 50 { 1 } else { 2 }).collect();
        let (tr, _) = split(&labels, &spec(0.1, true, 3)).unwrap();
        assert_eq!(tr.iter().filter(|&&i| labels[i] == 1).count(), 5);
        assert_eq!(tr.iter().filter(|&&i| labels[i] == 2).count(), 5);
    }

    #[test]
    fn same_seed_same_split() {
        let labels: Vec<u16> = (0..300).map(|i| (i % 4) as u16 + 1).collect();
        let a = split(&labels, &spec(0.1, true, 42)).unwrap();
        let b = split(&labels, &spec(0.1, true, 42)).unwrap();
        let c = split(&labels, &spec(0.1, true, 43)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn tiny_class_is_named() {
        let labels = vec![1, 1, 1, 7];
        match split(&labels, &spec(0.5, true, 0)) {
            Err(Error::Data(msg)) => assert!(msg.contains("class 7"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fraction_bounds() {
        let labels = vec![1u16; 10];
        assert!(split(&labels, &spec(0.0, false, 0)).is_err());
        assert!(split(&labels, &spec(1.0, false, 0)).is_err());
    }
}
