//! Datasets, distance functions, synthetic generators and file formats.

mod io;
mod synthetic;
mod transform;

pub use io::{
    read_csv, read_fvecs, read_fvecs_bytes, read_ivecs, read_ivecs_bytes, write_csv, write_fvecs, write_ivecs,
};
pub use synthetic::{generate_blobs, generate_circles, generate_moons};
pub use transform::{split, split_indices, standardize, Standardizer};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::param_err;
use crate::{Error, Result};

/// An immutable `n x d` point matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<f64>,
    n: usize,
    d: usize,
    labels: Option<Vec<u32>>,
}

impl Dataset {
    pub fn new(points: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(param_err("dimensionality must be at least 1"));
        }
        if points.is_empty() || !points.len().is_multiple_of(d) {
            return Err(param_err(format!("{} values do not form a non-empty matrix with {d} columns", points.len())));
        }
        if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite value at row {}, column {}", pos / d, pos % d)));
        }
        let n = points.len() / d;
        Ok(Self { points, n, d, labels: None })
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(param_err(format!("{} labels for {} points", labels.len(), self.n)));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.d)
    }

    /// Rows `indices` (in that order) as a new dataset; labels follow.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut points = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(param_err(format!("row {i} out of range for n={}", self.n)));
            }
            points.extend_from_slice(self.point(i));
        }
        let mut out = Dataset::new(points, self.d)?;
        if let Some(labels) = &self.labels {
            out.labels = Some(indices.iter().map(|&i| labels[i]).collect());
        }
        Ok(out)
    }

    /// Contiguous copy of the given rows, for feeding a model batch.
    pub fn gather(&self, indices: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            out.extend_from_slice(self.point(i));
        }
        out
    }

    /// 64-bit content fingerprint over shape and exact point bits. Labels are
    /// not included.
    pub fn checksum(&self) -> u64 {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        h.update((self.d as u64).to_le_bytes());
        for v in &self.points {
            h.update(v.to_bits().to_le_bytes());
        }
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("sha256 is 32 bytes"))
    }
}

/// Sum of squared coordinate differences, accumulated in f64.
#[inline]
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceFn {
    #[default]
    Euclidean,
    SquaredEuclidean,
}

impl DistanceFn {
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        self.from_squared(squared_euclidean(a, b))
    }

    /// Converts a squared Euclidean distance into this metric. Both metrics are
    /// monotone in the squared distance, so all rankings use the squared value
    /// and only reported distances go through this conversion.
    #[inline]
    pub fn from_squared(self, sq: f64) -> f64 {
        match self {
            DistanceFn::Euclidean => sq.sqrt(),
            DistanceFn::SquaredEuclidean => sq,
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            DistanceFn::Euclidean => 0,
            DistanceFn::SquaredEuclidean => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(DistanceFn::Euclidean),
            1 => Some(DistanceFn::SquaredEuclidean),
            _ => None,
        }
    }
}
