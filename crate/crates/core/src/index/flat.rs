use std::sync::Arc;

use super::{build_partition, check_probe, AnnIndex, Partition};
use crate::data::{Dataset, DistanceFn};
use crate::error::param_err;
use crate::model::PartitionerModel;
use crate::Result;

/// One trained model plus the lookup table of the partition it induces.
#[derive(Debug, Clone)]
pub struct FlatIndex {
    model: PartitionerModel,
    partition: Partition,
    dataset: Arc<Dataset>,
    distance: DistanceFn,
}

impl FlatIndex {
    pub fn build(model: PartitionerModel, dataset: Arc<Dataset>, distance: DistanceFn) -> Result<Self> {
        let partition = build_partition(&model, &dataset)?;
        Ok(Self { model, partition, dataset, distance })
    }

    /// Reassembles an index from stored parts, checking the partition is the
    /// one the model induces on `dataset`.
    pub fn from_parts(
        model: PartitionerModel,
        partition: Partition,
        dataset: Arc<Dataset>,
        distance: DistanceFn,
    ) -> Result<Self> {
        let replay = build_partition(&model, &dataset)?;
        if replay != partition {
            return Err(param_err("stored partition differs from the model's argmax assignment"));
        }
        Ok(Self { model, partition, dataset, distance })
    }

    pub fn model(&self) -> &PartitionerModel {
        &self.model
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn dataset_arc(&self) -> &Arc<Dataset> {
        &self.dataset
    }

    /// Highest bin probability for `q`, used to pick an ensemble member.
    pub fn confidence(&self, q: &[f64]) -> Result<f64> {
        Ok(self.model.predict_bins(q, 1)?[0].1)
    }
}

impl AnnIndex for FlatIndex {
    fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    fn distance(&self) -> DistanceFn {
        self.distance
    }

    fn num_bins(&self) -> usize {
        self.partition.m()
    }

    fn candidate_set(&self, q: &[f64], m_prime: usize) -> Result<Vec<u32>> {
        check_probe(m_prime, self.num_bins())?;
        let bins = self.model.predict_bins(q, m_prime)?;
        Ok(bins.iter().flat_map(|&(b, _)| self.partition.bin(b).iter().copied()).collect())
    }
}
