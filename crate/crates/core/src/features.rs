//! Turning activation tensors into feature vectors, plus normalization and
//! standardization used before classification or fusion.

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Stddev below which a feature is treated as constant.
pub const CONSTANT_FEATURE_TOL: f64 = 1e-12;

/// A stack of `n` feature maps, each an `n1 x n2` grid stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTensor {
    n1: usize,
    n2: usize,
    maps: Vec<Vec<f64>>,
}

impl ActivationTensor {
    /// `maps[i]` holds map `i` in row-major order and must have `n1 * n2`
    /// finite entries.
    pub fn new(n1: usize, n2: usize, maps: Vec<Vec<f64>>) -> Result<Self> {
        if n1 == 0 || n2 == 0 || maps.is_empty() {
            return Err(Error::InvalidParameters(format!(
                "tensor dimensions must be positive (n1 = {n1}, n2 = {n2}, n = {})",
                maps.len()
            )));
        }
        for (i, map) in maps.iter().enumerate() {
            if map.len() != n1 * n2 {
                return Err(Error::DimensionMismatch {
                    expected: n1 * n2,
                    found: map.len(),
                });
            }
            if let Some(index) = map.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    sample: format!("map {i}"),
                    index,
                });
            }
        }
        Ok(Self { n1, n2, maps })
    }

    /// Builds a tensor from nested grids: `grids[channel][row][col]`.
    pub fn from_grids(grids: &[Vec<Vec<f64>>]) -> Result<Self> {
        let n1 = grids.first().map_or(0, |g| g.len());
        let n2 = grids.first().and_then(|g| g.first()).map_or(0, |r| r.len());
        let mut maps = Vec::with_capacity(grids.len());
        for grid in grids {
            if grid.len() != n1 || grid.iter().any(|row| row.len() != n2) {
                return Err(Error::InvalidParameters(
                    "feature maps must share one n1 x n2 shape".into(),
                ));
            }
            maps.push(grid.iter().flatten().copied().collect());
        }
        Self::new(n1, n2, maps)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    /// Number of feature maps.
    pub fn channels(&self) -> usize {
        self.maps.len()
    }

    /// Length of the flattened vector, `n1 * n2 * n`.
    pub fn flat_len(&self) -> usize {
        self.n1 * self.n2 * self.maps.len()
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.maps[channel][row * self.n2 + col]
    }

    /// Position of entry `(channel, row, col)` in the flattened vector.
    pub fn flat_index(&self, channel: usize, row: usize, col: usize) -> usize {
        (channel * self.n1 + row) * self.n2 + col
    }

    /// Inverse of [`flat_index`](Self::flat_index).
    pub fn unflat_index(&self, index: usize) -> (usize, usize, usize) {
        let per_map = self.n1 * self.n2;
        let within = index % per_map;
        (index / per_map, within / self.n2, within % self.n2)
    }
}

/// Vectorizes each map row-major and concatenates the maps in channel order.
pub fn flatten_activations(t: &ActivationTensor) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.flat_len());
    for map in &t.maps {
        out.extend_from_slice(map);
    }
    out
}

pub fn l2_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Returns `x / ||x||_2`.
pub fn l2_normalize(x: &[f64]) -> Result<Vec<f64>> {
    let norm = l2_norm(x);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroNormSample(String::new()));
    }
    Ok(x.iter().map(|v| v / norm).collect())
}

/// Per-feature mean and population standard deviation fitted on enrolment
/// data.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationModel {
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
    /// Features whose stddev is below [`CONSTANT_FEATURE_TOL`].
    pub constant: Vec<bool>,
}

impl StandardizationModel {
    pub fn dim(&self) -> usize {
        self.means.len()
    }
}

pub fn fit_standardizer(enrolment: &Dataset) -> Result<StandardizationModel> {
    let m = enrolment.len();
    if m < 2 {
        return Err(Error::InsufficientSamples { needed: 2, found: m });
    }
    let d = enrolment.dim();
    let mut means = vec![0.0; d];
    for s in enrolment.samples() {
        for (acc, v) in means.iter_mut().zip(&s.values) {
            *acc += v;
        }
    }
    means.iter_mut().for_each(|v| *v /= m as f64);

    let mut variances = vec![0.0; d];
    for s in enrolment.samples() {
        for ((acc, v), mu) in variances.iter_mut().zip(&s.values).zip(&means) {
            *acc += (v - mu) * (v - mu);
        }
    }
    let stddevs: Vec<f64> = variances.iter().map(|v| (v / m as f64).sqrt()).collect();
    let constant = stddevs.iter().map(|&s| s < CONSTANT_FEATURE_TOL).collect();
    Ok(StandardizationModel {
        means,
        stddevs,
        constant,
    })
}

/// `(x_j - mean_j) / stddev_j`; constant features map to 0.
pub fn standardize(x: &[f64], model: &StandardizationModel) -> Result<Vec<f64>> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: x.len(),
        });
    }
    Ok(x.iter()
        .enumerate()
        .map(|(j, v)| {
            if model.constant[j] {
                0.0
            } else {
                (v - model.means[j]) / model.stddevs[j]
            }
        })
        .collect())
}

/// Standardizes the local and global parts with their own models and
/// concatenates them, local first.
pub fn fuse(
    local: &[f64],
    global: &[f64],
    local_model: &StandardizationModel,
    global_model: &StandardizationModel,
) -> Result<Vec<f64>> {
    let mut out = standardize(local, local_model)?;
    out.extend(standardize(global, global_model)?);
    Ok(out)
}
