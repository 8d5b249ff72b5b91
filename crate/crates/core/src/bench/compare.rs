use std::str::FromStr;
use std::sync::Arc;

use super::kmeans::KMeansIndex;
use super::sweep::{default_m_prime_grid, sweep_curve, CurveRow};
use crate::data::{Dataset, DistanceFn};
use crate::error::{param_err, Error};
use crate::index::{build_hierarchical, train_ensemble, AnnIndex, FlatIndex};
use crate::knn::{build_knn_matrix, ground_truth, KnnMatrix};
use crate::model::Architecture;
use crate::trainer::{train, TrainConfig};
use crate::Result;

/// A partitioning method that `compare` can benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Learned flat partition, or an ensemble when `ensemble > 1`.
    Usp,
    /// Learned tree over the configured fanouts.
    UspHierarchical,
    KMeans,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Usp => "usp",
            Method::UspHierarchical => "usp-hier",
            Method::KMeans => "kmeans",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "usp" => Ok(Method::Usp),
            "usp-hier" | "hier" => Ok(Method::UspHierarchical),
            "kmeans" => Ok(Method::KMeans),
            other => Err(Error::Usage(format!("unknown method '{other}' (expected usp, usp-hier or kmeans)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompareConfig {
    pub arch: Architecture,
    pub train: TrainConfig,
    pub k: usize,
    pub ensemble: usize,
    /// Fanouts for `UspHierarchical`; the leaf count sets that method's `m`.
    pub fanouts: Vec<usize>,
    pub kmeans_iters: usize,
    /// Probe depths; `None` uses [`default_m_prime_grid`] for each method's `m`.
    pub m_primes: Option<Vec<usize>>,
    pub distance: DistanceFn,
}

fn probe_grid(cfg: &CompareConfig, m: usize) -> Result<Vec<usize>> {
    match &cfg.m_primes {
        None => Ok(default_m_prime_grid(m)),
        Some(list) => {
            if let Some(&bad) = list.iter().find(|&&mp| mp == 0 || mp > m) {
                return Err(param_err(format!("m'={bad} outside 1..={m}")));
            }
            Ok(list.clone())
        }
    }
}

/// Builds a learned index: a single model, or an ensemble when `e > 1`.
pub fn build_learned(
    train_set: Arc<Dataset>,
    knn: &KnnMatrix,
    arch: &Architecture,
    cfg: &TrainConfig,
    e: usize,
    distance: DistanceFn,
) -> Result<Box<dyn AnnIndex>> {
    if e <= 1 {
        let (model, _) = train(&train_set, knn, arch, cfg)?;
        Ok(Box::new(FlatIndex::build(model, train_set, distance)?))
    } else {
        let (index, _) = train_ensemble(train_set, knn, arch, cfg, e, distance)?;
        Ok(Box::new(index))
    }
}

/// Sweeps every method against a single ground truth computed once up front.
pub fn compare(
    train_set: Arc<Dataset>,
    queries: &Dataset,
    methods: &[Method],
    cfg: &CompareConfig,
) -> Result<Vec<CurveRow>> {
    let gt = ground_truth(&train_set, queries, cfg.k, cfg.distance)?;
    let mut knn = None;
    let mut rows = Vec::new();
    for &method in methods {
        let (index, m): (Box<dyn AnnIndex>, usize) = match method {
            Method::Usp => {
                let knn = match &knn {
                    Some(k) => k,
                    None => knn.insert(build_knn_matrix(&train_set, cfg.train.k_prime, cfg.distance)?),
                };
                let idx = build_learned(train_set.clone(), knn, &cfg.arch, &cfg.train, cfg.ensemble, cfg.distance)?;
                (idx, cfg.arch.output_bins)
            }
            Method::UspHierarchical => {
                let idx = build_hierarchical(train_set.clone(), &cfg.arch, &cfg.train, &cfg.fanouts, cfg.distance)?;
                let m = idx.num_bins();
                (Box::new(idx), m)
            }
            Method::KMeans => {
                let m = cfg.arch.output_bins;
                let idx = KMeansIndex::build(train_set.clone(), m, cfg.kmeans_iters, cfg.train.seed, cfg.distance)?;
                (Box::new(idx), m)
            }
        };
        let curve = sweep_curve(index.as_ref(), queries, &gt, cfg.k, &probe_grid(cfg, m)?)?;
        rows.extend(CurveRow::from_curve(method.name(), m, cfg.k, cfg.train.seed, &curve));
    }
    Ok(rows)
}
