//! Scene ingestion and preprocessing.
//!
//! A scene arrives as an [`HsiCube`] (height x width x bands, raw sensor
//! values), loses its water-absorption bands via [`remove_bands`], and is
//! flattened to the labeled pixels by [`flatten_labeled`], which also rescales
//! every band to [0, 1] with min-max over the labeled pixels.

pub mod hsic;
mod split;
mod synth;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numerics::Matrix;
use crate::{Error, Result};

pub use hsic::{read_hsic, write_hsic};
pub use split::{split, SplitSpec};
pub use synth::{synth_scene, SyntheticScene, SYNTH_CLASSES};

/// Raw 3-D scene. Values are `(h, w, d)` row-major; label 0 means unlabeled.
#[derive(Debug, Clone)]
pub struct HsiCube {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub values: Vec<f32>,
    pub labels: Option<Vec<u16>>,
    /// Original (0-based) index of each band still present.
    pub band_map: Vec<usize>,
}

impl HsiCube {
    pub fn new(
        height: usize,
        width: usize,
        bands: usize,
        values: Vec<f32>,
        labels: Option<Vec<u16>>,
    ) -> Result<Self> {
        let cube = Self {
            height,
            width,
            bands,
            values,
            labels,
            band_map: (0..bands).collect(),
        };
        cube.check()?;
        Ok(cube)
    }

    pub(crate) fn check(&self) -> Result<()> {
        let pixels = self.height * self.width;
        if self.values.len() != pixels * self.bands {
            return Err(Error::data(format!(
                "value buffer has {} entries, expected {}x{}x{}",
                self.values.len(),
                self.height,
                self.width,
                self.bands
            )));
        }
        if let Some(l) = &self.labels {
            if l.len() != pixels {
                return Err(Error::data(format!(
                    "label buffer has {} entries, expected {pixels}",
                    l.len()
                )));
            }
        }
        if self.band_map.len() != self.bands {
            return Err(Error::data("band map length differs from band count"));
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn spectrum(&self, pixel: usize) -> &[f32] {
        &self.values[pixel * self.bands..(pixel + 1) * self.bands]
    }
}

/// Labeled pixels as an `n x d` matrix with values in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsiMatrix {
    pub values: Matrix,
    /// One class id (>= 1) per row.
    pub labels: Vec<u16>,
    pub band_map: Vec<usize>,
}

impl HsiMatrix {
    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn d(&self) -> usize {
        self.values.cols()
    }

    /// Distinct class ids, ascending.
    pub fn classes(&self) -> Vec<u16> {
        self.labels
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn band(&self, j: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.values[(i, j)]).collect()
    }
}

/// A 1-based inclusive band range such as `104-108`, or a single band `220`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandRange {
    pub first: usize,
    pub last: usize,
}

impl BandRange {
    pub fn new(first: usize, last: usize) -> Self {
        Self { first, last }
    }

    pub fn single(band: usize) -> Self {
        Self::new(band, band)
    }

    /// Parses a comma-separated list like `104-108,150-163,220`.
    pub fn parse_list(s: &str) -> Result<Vec<BandRange>> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl FromStr for BandRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::param(format!("bad band index {t:?}")))
        };
        match s.split_once('-') {
            Some((a, b)) => Ok(BandRange::new(num(a)?, num(b)?)),
            None => Ok(BandRange::single(num(s)?)),
        }
    }
}

impl fmt::Display for BandRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.first == self.last {
            write!(f, "{}", self.first)
        } else {
            write!(f, "{}-{}", self.first, self.last)
        }
    }
}

/// Water-absorption exclusions for the usual AVIRIS scenes.
///
/// Indian Pines: 20 bands, leaving 200 of the distributed 220-band cube.
pub fn indian_pines_exclusions() -> Vec<BandRange> {
    vec![
        BandRange::new(104, 108),
        BandRange::new(150, 163),
        BandRange::single(220),
    ]
}

/// Salinas: 20 bands, leaving 204 of 224.
pub fn salinas_exclusions() -> Vec<BandRange> {
    vec![
        BandRange::new(108, 112),
        BandRange::new(154, 167),
        BandRange::single(224),
    ]
}

/// Deletes the given 1-based inclusive band ranges. Overlapping ranges are merged.
pub fn remove_bands(cube: &HsiCube, excluded: &[BandRange]) -> Result<HsiCube> {
    let mut drop = vec![false; cube.bands];
    for r in excluded {
        if r.first == 0 || r.first > r.last || r.last > cube.bands {
            return Err(Error::param(format!(
                "band range {r} invalid for {} bands (1-based, inclusive)",
                cube.bands
            )));
        }
        for flag in &mut drop[r.first - 1..r.last] {
            *flag = true;
        }
    }
    let keep: Vec<usize> = (0..cube.bands).filter(|&j| !drop[j]).collect();

    let mut values = Vec::with_capacity(cube.pixels() * keep.len());
    for p in 0..cube.pixels() {
        let s = cube.spectrum(p);
        values.extend(keep.iter().map(|&j| s[j]));
    }
    Ok(HsiCube {
        height: cube.height,
        width: cube.width,
        bands: keep.len(),
        values,
        labels: cube.labels.clone(),
        band_map: keep.iter().map(|&j| cube.band_map[j]).collect(),
    })
}

/// Keeps labeled pixels in scan order and min-max scales each band to [0, 1].
///
/// A band that is constant over the labeled pixels maps to 0.
pub fn flatten_labeled(cube: &HsiCube) -> Result<HsiMatrix> {
    cube.check()?;
    let labels = cube
        .labels
        .as_ref()
        .ok_or_else(|| Error::data("cube has no labels"))?;
    let rows: Vec<usize> = (0..cube.pixels()).filter(|&p| labels[p] > 0).collect();
    if rows.is_empty() {
        return Err(Error::data("cube has no labeled pixels"));
    }
    let d = cube.bands;
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for &p in &rows {
        for (j, &v) in cube.spectrum(p).iter().enumerate() {
            let v = v as f64;
            if !v.is_finite() {
                return Err(Error::data(format!(
                    "non-finite value at pixel {p}, band {j}"
                )));
            }
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }

    let mut values = Matrix::zeros(rows.len(), d);
    for (i, &p) in rows.iter().enumerate() {
        for (j, (&v, out)) in cube.spectrum(p).iter().zip(values.row_mut(i)).enumerate() {
            let span = hi[j] - lo[j];
            *out = if span > 0.0 {
                ((v as f64 - lo[j]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
    }
    Ok(HsiMatrix {
        values,
        labels: rows.iter().map(|&p| labels[p]).collect(),
        band_map: cube.band_map.clone(),
    })
}
