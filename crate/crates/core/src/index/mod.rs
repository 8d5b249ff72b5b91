//! Partitions, lookup tables and the three learned index kinds.

mod ensemble;
mod flat;
mod hierarchical;
mod io;

pub use ensemble::{compute_ensemble_weights, train_ensemble, EnsembleIndex, EnsembleQueryMode};
pub use flat::FlatIndex;
pub use hierarchical::{build_hierarchical, HierarchicalIndex, HierarchyNode, NodeKind};
pub use io::{load_index, read_index, save_index, LoadedIndex};

use serde::{Deserialize, Serialize};

use crate::data::{squared_euclidean, Dataset, DistanceFn};
use crate::error::param_err;
use crate::knn::smallest_k;
use crate::model::PartitionerModel;
use crate::parallel::map_indexed;
use crate::{Error, Result};

/// Assignment of every point to one bin, plus the inverse lookup table
/// stored as contiguous per-bin slices of ascending point ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<u32>,
    offsets: Vec<usize>,
    members: Vec<u32>,
    m: usize,
}

impl Partition {
    pub fn from_assignment(assignment: Vec<u32>, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(param_err("a partition needs at least one bin"));
        }
        if let Some(&b) = assignment.iter().find(|&&b| b as usize >= m) {
            return Err(param_err(format!("bin id {b} out of range for m={m}")));
        }
        let mut offsets = vec![0usize; m + 1];
        for &b in &assignment {
            offsets[b as usize + 1] += 1;
        }
        for j in 0..m {
            offsets[j + 1] += offsets[j];
        }
        let mut cursor = offsets.clone();
        let mut members = vec![0u32; assignment.len()];
        for (i, &b) in assignment.iter().enumerate() {
            members[cursor[b as usize]] = i as u32;
            cursor[b as usize] += 1;
        }
        Ok(Self { assignment, offsets, members, m })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    /// `m + 1` offsets into the concatenated member list.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Point ids in bin `b`, ascending.
    pub fn bin(&self, b: usize) -> &[u32] {
        &self.members[self.offsets[b]..self.offsets[b + 1]]
    }

    pub fn histogram(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

const INFERENCE_CHUNK: usize = 512;

/// Argmax bin of every point of `ds` under the frozen model.
pub fn build_partition(model: &PartitionerModel, ds: &Dataset) -> Result<Partition> {
    if model.arch().input_dim != ds.d() {
        return Err(param_err(format!("model expects d={}, dataset has d={}", model.arch().input_dim, ds.d())));
    }
    let chunks = ds.n().div_ceil(INFERENCE_CHUNK);
    let parts = map_indexed(chunks, |c| {
        let lo = c * INFERENCE_CHUNK;
        let hi = (lo + INFERENCE_CHUNK).min(ds.n());
        let probs = model.infer(&ds.points()[lo * ds.d()..hi * ds.d()])?;
        Ok::<_, Error>((0..probs.rows()).map(|r| probs.argmax(r) as u32).collect::<Vec<_>>())
    });
    let mut assignment = Vec::with_capacity(ds.n());
    for p in parts {
        assignment.extend(p?);
    }
    Partition::from_assignment(assignment, model.num_bins())
}

/// Neighbors found by scanning a candidate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub ids: Vec<u32>,
    pub distances: Vec<f64>,
    /// Number of distance evaluations, equal to the candidate set size.
    pub candidate_count: usize,
}

/// Exact k-NN of `q` within `candidates`; `observe` sees every point whose
/// distance is evaluated.
pub(crate) fn scan(
    ds: &Dataset,
    dist: DistanceFn,
    q: &[f64],
    candidates: &[u32],
    k: usize,
    observe: &mut dyn FnMut(u32),
) -> QueryResult {
    let mut evaluated = 0usize;
    let scored: Vec<(f64, u32)> = candidates
        .iter()
        .map(|&i| {
            observe(i);
            evaluated += 1;
            (squared_euclidean(q, ds.point(i as usize)), i)
        })
        .collect();
    let best = smallest_k(scored, k);
    QueryResult {
        ids: best.iter().map(|&(_, i)| i).collect(),
        distances: best.iter().map(|&(sq, _)| dist.from_squared(sq)).collect(),
        candidate_count: evaluated,
    }
}

pub(crate) fn check_probe(m_prime: usize, m: usize) -> Result<()> {
    if m_prime == 0 || m_prime > m {
        return Err(param_err(format!("m' must satisfy 1 <= m' <= {m}, got {m_prime}")));
    }
    Ok(())
}

/// Common query interface over learned indexes and the k-means baseline.
pub trait AnnIndex: Sync {
    fn dataset(&self) -> &Dataset;

    fn distance(&self) -> DistanceFn;

    fn num_bins(&self) -> usize;

    /// Points of the `m_prime` highest-ranked bins, bin by bin in rank order
    /// and ascending within a bin.
    fn candidate_set(&self, q: &[f64], m_prime: usize) -> Result<Vec<u32>>;

    fn query_observed(&self, q: &[f64], k: usize, m_prime: usize, observe: &mut dyn FnMut(u32)) -> Result<QueryResult> {
        if k == 0 {
            return Err(param_err("k must be at least 1"));
        }
        if q.len() != self.dataset().d() {
            return Err(Error::Input(format!(
                "query has {} coordinates, index expects {}",
                q.len(),
                self.dataset().d()
            )));
        }
        let candidates = self.candidate_set(q, m_prime)?;
        Ok(scan(self.dataset(), self.distance(), q, &candidates, k, observe))
    }

    fn query(&self, q: &[f64], k: usize, m_prime: usize) -> Result<QueryResult> {
        self.query_observed(q, k, m_prime, &mut |_| {})
    }
}
