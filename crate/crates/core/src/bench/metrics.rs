use std::collections::{HashMap, HashSet};

use crate::error::param_err;
use crate::index::Partition;
use crate::Result;

/// Fraction of `truth` present in `result`.
pub fn recall_at_k(result: &[u32], truth: &[u32]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let truth: HashSet<u32> = truth.iter().copied().collect();
    let found = result.iter().filter(|id| truth.contains(id)).count();
    found as f64 / truth.len() as f64
}

/// `(max_bin, min_bin, max_bin / (n / m))`.
pub fn bin_balance(partition: &Partition) -> (usize, usize, f64) {
    let hist = partition.histogram();
    let max = hist.iter().copied().max().unwrap_or(0);
    let min = hist.iter().copied().min().unwrap_or(0);
    let ideal = partition.n() as f64 / partition.m() as f64;
    (max, min, max as f64 / ideal)
}

/// Sum over bins of the majority label count, divided by n.
pub fn cluster_purity(partition: &Partition, labels: Option<&[u32]>) -> Result<f64> {
    let labels = labels.ok_or_else(|| param_err("cluster purity needs labels"))?;
    if labels.len() != partition.n() {
        return Err(param_err(format!("{} labels for {} points", labels.len(), partition.n())));
    }
    let mut majority = 0usize;
    for b in 0..partition.m() {
        let mut counts: HashMap<u32, usize> = HashMap::new();
        for &i in partition.bin(b) {
            *counts.entry(labels[i as usize]).or_default() += 1;
        }
        majority += counts.values().copied().max().unwrap_or(0);
    }
    Ok(majority as f64 / partition.n() as f64)
}
