//! Boosted ensembles of partitions.
//!
//! Members are trained one after another. Points whose neighbors the previous
//! member split across bins get larger quality weights for the next member,
//! multiplied into the earlier weights so that only points every member has
//! handled badly stay heavy. A query is answered by the single member most
//! confident about it.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{check_probe, AnnIndex, FlatIndex, Partition};
use crate::data::{Dataset, DistanceFn};
use crate::error::param_err;
use crate::knn::KnnMatrix;
use crate::model::Architecture;
use crate::trainer::{train, TrainConfig, TrainReport};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleQueryMode {
    /// Candidates of the member with the highest top-bin probability.
    #[default]
    BestConfidence,
    /// Union of every member's candidates (experimental).
    Union,
}

impl EnsembleQueryMode {
    pub(crate) fn tag(self) -> u8 {
        match self {
            Self::BestConfidence => 0,
            Self::Union => 1,
        }
    }

    pub(crate) fn from_tag(t: u8) -> Option<Self> {
        match t {
            0 => Some(Self::BestConfidence),
            1 => Some(Self::Union),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleIndex {
    members: Vec<FlatIndex>,
    /// Row `j` holds the point weights member `j` was trained with.
    weight_history: Vec<Vec<f64>>,
    mode: EnsembleQueryMode,
}

impl EnsembleIndex {
    pub fn new(members: Vec<FlatIndex>, weight_history: Vec<Vec<f64>>) -> Result<Self> {
        if members.is_empty() {
            return Err(param_err("an ensemble needs at least one member"));
        }
        let first = members[0].dataset_arc();
        if members.iter().any(|m| !Arc::ptr_eq(m.dataset_arc(), first) && **m.dataset_arc() != **first) {
            return Err(param_err("ensemble members index different datasets"));
        }
        if members.iter().any(|m| m.num_bins() != members[0].num_bins()) {
            return Err(param_err("ensemble members disagree on the number of bins"));
        }
        if weight_history.len() != members.len() || weight_history.iter().any(|w| w.len() != first.n()) {
            return Err(param_err("weight history must hold one n-vector per member"));
        }
        Ok(Self { members, weight_history, mode: EnsembleQueryMode::default() })
    }

    pub fn with_mode(mut self, mode: EnsembleQueryMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> EnsembleQueryMode {
        self.mode
    }

    pub fn members(&self) -> &[FlatIndex] {
        &self.members
    }

    pub fn weight_history(&self) -> &[Vec<f64>] {
        &self.weight_history
    }

    pub fn confidences(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.members.iter().map(|m| m.confidence(q)).collect()
    }

    /// Index of the most confident member, lowest index on ties.
    pub fn best_member(&self, q: &[f64]) -> Result<usize> {
        Ok(crate::model::argmax(&self.confidences(q)?))
    }
}

impl AnnIndex for EnsembleIndex {
    fn dataset(&self) -> &Dataset {
        self.members[0].dataset()
    }

    fn distance(&self) -> DistanceFn {
        self.members[0].distance()
    }

    fn num_bins(&self) -> usize {
        self.members[0].num_bins()
    }

    fn candidate_set(&self, q: &[f64], m_prime: usize) -> Result<Vec<u32>> {
        check_probe(m_prime, self.num_bins())?;
        match self.mode {
            EnsembleQueryMode::BestConfidence => self.members[self.best_member(q)?].candidate_set(q, m_prime),
            EnsembleQueryMode::Union => {
                let mut seen = vec![false; self.dataset().n()];
                let mut out = Vec::new();
                for m in &self.members {
                    for i in m.candidate_set(q, m_prime)? {
                        if !std::mem::replace(&mut seen[i as usize], true) {
                            out.push(i);
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Next-stage weights: the number of each point's k' neighbors placed in a
/// different bin, times the previous weight, rescaled to mean 1.
pub fn compute_ensemble_weights(partition: &Partition, knn: &KnnMatrix, prev: &[f64]) -> Result<Vec<f64>> {
    let n = partition.n();
    if knn.n() != n || prev.len() != n {
        return Err(param_err("partition, k'-NN matrix and weights disagree on n"));
    }
    if prev.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(param_err("previous weights must be finite and non-negative"));
    }
    let assign = partition.assignment();
    let raw: Vec<f64> = (0..n)
        .map(|i| {
            let misplaced = knn.row(i).iter().filter(|&&j| assign[j as usize] != assign[i]).count();
            misplaced as f64 * prev[i]
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total == 0.0 {
        return Err(Error::EnsembleSaturated);
    }
    let mean = total / n as f64;
    Ok(raw.into_iter().map(|w| w / mean).collect())
}

/// Trains up to `e` members sequentially; member `j` uses seed `cfg.seed + j`.
/// Stops early once no point has a misplaced neighbor.
pub fn train_ensemble(
    ds: Arc<Dataset>,
    knn: &KnnMatrix,
    arch: &Architecture,
    cfg: &TrainConfig,
    e: usize,
    distance: DistanceFn,
) -> Result<(EnsembleIndex, Vec<TrainReport>)> {
    if e == 0 {
        return Err(param_err("ensemble size must be at least 1"));
    }
    let mut weights = cfg.point_weights.clone().unwrap_or_else(|| vec![1.0; ds.n()]);
    let mut members = Vec::with_capacity(e);
    let mut history = Vec::with_capacity(e);
    let mut reports = Vec::with_capacity(e);
    for j in 0..e {
        let member_cfg =
            TrainConfig { seed: cfg.seed.wrapping_add(j as u64), point_weights: Some(weights.clone()), ..cfg.clone() };
        let (model, report) = train(&ds, knn, arch, &member_cfg)?;
        let member = FlatIndex::build(model, ds.clone(), distance)?;
        history.push(weights.clone());
        reports.push(report);
        let next = if j + 1 < e { Some(compute_ensemble_weights(member.partition(), knn, &weights)) } else { None };
        members.push(member);
        match next {
            Some(Ok(w)) => weights = w,
            Some(Err(Error::EnsembleSaturated)) => break,
            Some(Err(other)) => return Err(other),
            None => {}
        }
    }
    Ok((EnsembleIndex::new(members, history)?, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_moons;
    use crate::knn::build_knn_matrix;
    use crate::model::PartitionerModel;

    fn line_knn(n: usize, k: usize) -> (Dataset, KnnMatrix) {
        let ds = Dataset::new((0..n).map(|i| i as f64).collect(), 1).unwrap();
        let knn = build_knn_matrix(&ds, k, DistanceFn::Euclidean).unwrap();
        (ds, knn)
    }

    #[test]
    fn weights_count_misplaced_neighbors() {
        let (_, knn) = line_knn(8, 2);
        // Bins {0..3}, {4..7}: only points 3 and 4 have a neighbor across.
        let p = Partition::from_assignment(vec![0, 0, 0, 0, 1, 1, 1, 1], 2).unwrap();
        let w = compute_ensemble_weights(&p, &knn, &[1.0; 8]).unwrap();
        // Rows: 3 -> [2, 4], 4 -> [3, 5]; raw = 1 each, mean = 2/8.
        assert_eq!(w, vec![0.0, 0.0, 0.0, 4.0, 4.0, 0.0, 0.0, 0.0]);

        let mut prev = [1.0; 8];
        prev[3] = 0.0;
        let w = compute_ensemble_weights(&p, &knn, &prev).unwrap();
        assert_eq!(w[3], 0.0);
        assert_eq!(w[4], 8.0);
    }

    #[test]
    fn raw_count_before_normalization() {
        let (_, knn) = line_knn(12, 5);
        // Point 0's neighbors are 1..=5; put 4 and 5 elsewhere.
        let mut assign = vec![0u32; 12];
        assign[4] = 1;
        assign[5] = 1;
        let p = Partition::from_assignment(assign, 2).unwrap();
        let w = compute_ensemble_weights(&p, &knn, &[1.0; 12]).unwrap();
        let raw_total: f64 = (0..12)
            .map(|i| knn.row(i).iter().filter(|&&j| p.assignment()[j as usize] != p.assignment()[i]).count() as f64)
            .sum();
        assert!((w[0] - 2.0 / (raw_total / 12.0)).abs() < 1e-12);
    }

    #[test]
    fn saturation_is_signalled() {
        let (_, knn) = line_knn(6, 2);
        let p = Partition::from_assignment(vec![1; 6], 2).unwrap();
        assert!(matches!(compute_ensemble_weights(&p, &knn, &[1.0; 6]), Err(Error::EnsembleSaturated)));
    }

    #[test]
    fn single_member_matches_plain_training() {
        let ds = Arc::new(generate_moons(200, 0.05, 3).unwrap());
        let knn = build_knn_matrix(&ds, 10, DistanceFn::Euclidean).unwrap();
        let arch = Architecture::mlp(2, 4);
        let cfg = TrainConfig { epochs: 3, batch_fraction: 0.2, seed: 5, ..Default::default() };
        let (ens, _) = train_ensemble(ds.clone(), &knn, &arch, &cfg, 1, DistanceFn::Euclidean).unwrap();
        let (model, _) = train(&ds, &knn, &arch, &cfg).unwrap();
        assert_eq!(ens.members().len(), 1);
        assert_eq!(ens.members()[0].model(), &model);
        let flat = FlatIndex::build(model, ds.clone(), DistanceFn::Euclidean).unwrap();
        for q in [[0.3, 0.1], [-0.7, 0.9], [1.5, -0.2]] {
            assert_eq!(ens.query(&q, 5, 2).unwrap(), flat.query(&q, 5, 2).unwrap());
        }
    }

    #[test]
    fn most_confident_member_wins() {
        let ds = Arc::new(Dataset::new(vec![0.0, 1.0, 2.0, 3.0], 1).unwrap());
        let member = |logits: [f64; 2], seed| {
            let mut model = PartitionerModel::init(&Architecture::logistic(1, 2), seed).unwrap();
            {
                let mut g = model.parameters_mut();
                g[0].fill(0.0);
                g[1].copy_from_slice(&logits);
            }
            FlatIndex::build(model, ds.clone(), DistanceFn::Euclidean).unwrap()
        };
        let confident = member([0.9f64.ln(), 0.1f64.ln()], 0);
        let unsure = member([0.4f64.ln(), 0.6f64.ln()], 1);
        let ens = EnsembleIndex::new(vec![confident.clone(), unsure.clone()], vec![vec![1.0; 4]; 2]).unwrap();
        assert_eq!(ens.best_member(&[1.0]).unwrap(), 0);
        let ens = EnsembleIndex::new(vec![unsure, confident], vec![vec![1.0; 4]; 2]).unwrap();
        assert_eq!(ens.best_member(&[1.0]).unwrap(), 1);

        let twin = member([0.9f64.ln(), 0.1f64.ln()], 2);
        let tied = EnsembleIndex::new(vec![twin.clone(), twin], vec![vec![1.0; 4]; 2]).unwrap();
        assert_eq!(tied.best_member(&[1.0]).unwrap(), 0);
    }
}
