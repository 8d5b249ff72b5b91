//! Trees of partitioners with fanouts `(m_1, ..., m_l)`.
//!
//! The root splits all points into `m_1` bins, each child splits its bin's
//! points into `m_2`, and so on, for `m_1 * ... * m_l` leaf bins. A child is
//! trained only on its own points against a k'-NN matrix recomputed inside
//! that subset. A leaf's probability for a query is the product of the bin
//! probabilities along its path.

use std::sync::Arc;

use super::{build_partition, check_probe, AnnIndex, Partition};
use crate::data::{Dataset, DistanceFn};
use crate::error::param_err;
use crate::knn::build_knn_matrix;
use crate::model::{argmax, rank_bins, Architecture, PartitionerModel};
use crate::trainer::{train, TrainConfig};
use crate::Result;

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Internal {
        model: PartitionerModel,
        /// Node ids, one per bin of `model`.
        children: Vec<usize>,
    },
    /// `early` marks a node that stopped splitting because it held too few
    /// points; all of its points (and probability) go to its first leaf id.
    Leaf { early: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyNode {
    pub level: usize,
    /// First leaf bin id covered by this subtree.
    pub leaf_offset: usize,
    /// Number of leaf bin ids covered by this subtree.
    pub span: usize,
    pub num_points: usize,
    pub kind: NodeKind,
}

#[derive(Debug, Clone)]
pub struct HierarchicalIndex {
    fanouts: Vec<usize>,
    /// Node 0 is the root; ids follow depth-first build order.
    nodes: Vec<HierarchyNode>,
    partition: Partition,
    dataset: Arc<Dataset>,
    distance: DistanceFn,
}

struct Builder<'a> {
    ds: &'a Dataset,
    arch: &'a Architecture,
    cfg: &'a TrainConfig,
    fanouts: &'a [usize],
    nodes: Vec<HierarchyNode>,
    assignment: Vec<u32>,
}

impl Builder<'_> {
    fn node(&mut self, points: Vec<usize>, level: usize, leaf_offset: usize) -> Result<usize> {
        let span: usize = self.fanouts[level..].iter().product();
        let id = self.nodes.len();
        self.nodes.push(HierarchyNode {
            level,
            leaf_offset,
            span,
            num_points: points.len(),
            kind: NodeKind::Leaf { early: false },
        });
        if level == self.fanouts.len() {
            points.iter().for_each(|&i| self.assignment[i] = leaf_offset as u32);
            return Ok(id);
        }
        let fanout = self.fanouts[level];
        if points.len() < fanout.max(self.cfg.k_prime + 1) {
            points.iter().for_each(|&i| self.assignment[i] = leaf_offset as u32);
            self.nodes[id].kind = NodeKind::Leaf { early: true };
            return Ok(id);
        }
        let subset = self.ds.subset(&points)?;
        let knn = build_knn_matrix(&subset, self.cfg.k_prime, DistanceFn::Euclidean)?;
        let arch = Architecture { input_dim: self.ds.d(), ..self.arch.with_output_bins(fanout) };
        let cfg = TrainConfig { seed: self.cfg.seed.wrapping_add(id as u64), point_weights: None, ..self.cfg.clone() };
        let (model, _) = train(&subset, &knn, &arch, &cfg)?;
        let local = build_partition(&model, &subset)?;
        let child_span = span / fanout;
        let mut children = Vec::with_capacity(fanout);
        for b in 0..fanout {
            let child_points: Vec<usize> = local.bin(b).iter().map(|&r| points[r as usize]).collect();
            children.push(self.node(child_points, level + 1, leaf_offset + b * child_span)?);
        }
        self.nodes[id].kind = NodeKind::Internal { model, children };
        Ok(id)
    }
}

/// Builds the tree top-down. Node `id` trains with seed `cfg.seed + id`, so a
/// single-level tree reproduces the flat model trained with `cfg.seed`.
pub fn build_hierarchical(
    ds: Arc<Dataset>,
    arch: &Architecture,
    cfg: &TrainConfig,
    fanouts: &[usize],
    distance: DistanceFn,
) -> Result<HierarchicalIndex> {
    if fanouts.is_empty() || fanouts.iter().any(|&f| f < 2) {
        return Err(param_err(format!("fanouts must be non-empty and each at least 2, got {fanouts:?}")));
    }
    let leaves = fanouts
        .iter()
        .try_fold(1usize, |acc, &f| acc.checked_mul(f))
        .ok_or_else(|| param_err("fanout product overflows"))?;
    if leaves > ds.n() {
        return Err(param_err(format!("{leaves} leaf bins exceed n={}", ds.n())));
    }
    cfg.validate()?;
    let mut b = Builder { ds: &ds, arch, cfg, fanouts, nodes: Vec::new(), assignment: vec![0; ds.n()] };
    b.node((0..ds.n()).collect(), 0, 0)?;
    let partition = Partition::from_assignment(b.assignment, leaves)?;
    let nodes = b.nodes;
    Ok(HierarchicalIndex { fanouts: fanouts.to_vec(), nodes, partition, dataset: ds, distance })
}

impl HierarchicalIndex {
    pub(crate) fn from_parts(
        fanouts: Vec<usize>,
        nodes: Vec<HierarchyNode>,
        partition: Partition,
        dataset: Arc<Dataset>,
        distance: DistanceFn,
    ) -> Result<Self> {
        let leaves: usize = fanouts.iter().product();
        if nodes.is_empty() || partition.m() != leaves || partition.n() != dataset.n() {
            return Err(param_err("hierarchy shape does not match its partition"));
        }
        for node in &nodes {
            if let NodeKind::Internal { model, children } = &node.kind {
                if children.len() != model.num_bins() || children.iter().any(|&c| c >= nodes.len() || c == 0) {
                    return Err(param_err("hierarchy node has invalid children"));
                }
            }
            if node.leaf_offset + node.span > leaves {
                return Err(param_err("hierarchy node covers leaves out of range"));
            }
        }
        let index = Self { fanouts, nodes, partition, dataset, distance };
        if index.replay_assignment()? != index.partition.assignment() {
            return Err(param_err("stored leaf assignment differs from the tree's argmax path"));
        }
        Ok(index)
    }

    pub fn fanouts(&self) -> &[usize] {
        &self.fanouts
    }

    pub fn nodes(&self) -> &[HierarchyNode] {
        &self.nodes
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn num_models(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Internal { .. })).count()
    }

    pub fn early_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Leaf { early: true }).count()
    }

    /// Probability of every leaf bin for `q`: the product of the bin
    /// probabilities along the root-to-leaf path.
    pub fn hier_bin_probs(&self, q: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.partition.m()];
        let mut stack = vec![(0usize, 1.0f64)];
        while let Some((id, mass)) = stack.pop() {
            let node = &self.nodes[id];
            match &node.kind {
                NodeKind::Leaf { .. } => out[node.leaf_offset] += mass,
                NodeKind::Internal { model, children } => {
                    let probs = model.infer(q)?;
                    for (&child, &p) in children.iter().zip(probs.row(0)) {
                        stack.push((child, mass * p));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Leaf id of every dataset point obtained by following argmax bins from
    /// the root.
    pub fn replay_assignment(&self) -> Result<Vec<u32>> {
        self.dataset
            .rows()
            .map(|p| {
                let mut id = 0;
                loop {
                    match &self.nodes[id].kind {
                        NodeKind::Leaf { .. } => return Ok(self.nodes[id].leaf_offset as u32),
                        NodeKind::Internal { model, children } => {
                            id = children[argmax(model.infer(p)?.row(0))];
                        }
                    }
                }
            })
            .collect()
    }

    pub fn dataset_arc(&self) -> &Arc<Dataset> {
        &self.dataset
    }
}

impl AnnIndex for HierarchicalIndex {
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
        let probs = self.hier_bin_probs(q)?;
        Ok(rank_bins(&probs, m_prime).into_iter().flat_map(|(b, _)| self.partition.bin(b).iter().copied()).collect())
    }
}
