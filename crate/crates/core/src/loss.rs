//! Two-term partitioning loss over a mini-batch.
//!
//! * quality: weighted mean cross-entropy between each point's bin
//!   distribution and the distribution of bins its k' neighbors fall into;
//! * balance: minus the sum of the `ceil(b / m)` largest probabilities in
//!   every bin column, which is smallest for hard, equally sized bins.
//!
//! `total = quality + eta * balance`. Gradients are returned with respect to
//! the logits so the softmax and the cross-entropy stay fused.

use serde::{Deserialize, Serialize};

use crate::error::param_err;
use crate::knn::KnnMatrix;
use crate::model::{softmax_backward, BinProbabilities};
use crate::{Error, Result};

/// How neighbor outputs are turned into a target distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// Histogram of the neighbors' most probable bins.
    #[default]
    Argmax,
    /// Mean of the neighbors' full probability rows.
    SoftMean,
}

/// Per batch point, the fraction of its k' neighbors in each bin. Constant
/// with respect to the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborBinDistribution {
    targets: Vec<f64>,
    rows: usize,
    m: usize,
}

impl NeighborBinDistribution {
    pub fn from_rows(targets: Vec<f64>, m: usize) -> Result<Self> {
        if m == 0 || !targets.len().is_multiple_of(m) {
            return Err(param_err("targets do not split into rows of m"));
        }
        let rows = targets.len() / m;
        Ok(Self { targets, rows, m })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.targets[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}

/// Builds targets for `batch` from the current model outputs of the
/// neighbors. `neighbor_ids` must be sorted ascending, row `r` of
/// `neighbor_probs` belonging to `neighbor_ids[r]`.
pub fn neighbor_bin_distribution(
    batch: &[usize],
    knn: &KnnMatrix,
    neighbor_ids: &[u32],
    neighbor_probs: &BinProbabilities,
    mode: TargetMode,
) -> Result<NeighborBinDistribution> {
    if neighbor_ids.len() != neighbor_probs.rows() {
        return Err(Error::Usage("neighbor ids and probability rows differ in length".into()));
    }
    let m = neighbor_probs.m();
    let k = knn.k_prime() as f64;
    let mut targets = vec![0.0; batch.len() * m];
    for (r, &i) in batch.iter().enumerate() {
        if i >= knn.n() {
            return Err(param_err(format!("batch point {i} outside k'-NN matrix")));
        }
        let out = &mut targets[r * m..(r + 1) * m];
        for &j in knn.row(i) {
            let pos = neighbor_ids
                .binary_search(&j)
                .map_err(|_| Error::Usage(format!("no model output for neighbor {j} of point {i}")))?;
            match mode {
                TargetMode::Argmax => out[neighbor_probs.argmax(pos)] += 1.0,
                TargetMode::SoftMean => out.iter_mut().zip(neighbor_probs.row(pos)).for_each(|(o, p)| *o += p),
            }
        }
        out.iter_mut().for_each(|v| *v /= k);
    }
    Ok(NeighborBinDistribution { targets, rows: batch.len(), m })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityCost {
    pub value: f64,
    /// Weighted cross-entropy of each row (before the batch mean).
    pub per_point: Vec<f64>,
    pub grad_logits: Vec<f64>,
}

fn check_weights(weights: Option<&[f64]>, rows: usize) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != rows {
            return Err(param_err(format!("{} weights for a batch of {rows}", w.len())));
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(param_err("point weights must be finite and non-negative"));
        }
    }
    Ok(())
}

/// `mean_i w_i * CE(t_i, p_i)` and its logit gradient `w_i (p_i - t_i) / b`.
pub fn quality_cost(
    probs: &BinProbabilities,
    targets: &NeighborBinDistribution,
    weights: Option<&[f64]>,
) -> Result<QualityCost> {
    let (b, m) = (probs.rows(), probs.m());
    if targets.rows != b || targets.m != m {
        return Err(param_err("probabilities and targets differ in shape"));
    }
    check_weights(weights, b)?;
    let mut per_point = Vec::with_capacity(b);
    let mut grad_logits = Vec::with_capacity(b * m);
    for i in 0..b {
        let w = weights.map_or(1.0, |w| w[i]);
        let t = targets.row(i);
        let ce: f64 = if w == 0.0 {
            0.0
        } else {
            -t.iter().zip(probs.log_row(i)).filter(|(tj, _)| **tj > 0.0).map(|(tj, lp)| tj * lp).sum::<f64>()
        };
        per_point.push(w * ce);
        // The fused form assumes rows of t sum to one.
        let t_sum: f64 = t.iter().sum();
        grad_logits.extend(probs.row(i).iter().zip(t).map(|(p, tj)| w * (p * t_sum - tj) / b as f64));
    }
    let value = per_point.iter().sum::<f64>() / b as f64;
    Ok(QualityCost { value, per_point, grad_logits })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceCost {
    pub value: f64,
    /// -1 on selected entries, 0 elsewhere.
    pub grad_probs: Vec<f64>,
    /// Selected `(row, column)` entries, column by column.
    pub window: Vec<(usize, usize)>,
}

/// Window size used by [`balance_cost`] for a batch of `b` rows and `m` bins.
pub fn window_size(b: usize, m: usize) -> usize {
    b.div_ceil(m)
}

/// Minus the sum of the `ceil(b / m)` largest entries of each column. Ties in
/// the selection go to the lower row index.
pub fn balance_cost(probs: &BinProbabilities) -> Result<BalanceCost> {
    let (b, m) = (probs.rows(), probs.m());
    if b < m {
        return Err(param_err(format!("balance window needs at least m={m} rows, got {b}")));
    }
    let t = window_size(b, m);
    let mut grad_probs = vec![0.0; b * m];
    let mut window = Vec::with_capacity(t * m);
    let mut value = 0.0;
    let mut rows: Vec<usize> = (0..b).collect();
    for j in 0..m {
        let col = |i: usize| probs.as_slice()[i * m + j];
        let cmp = |a: &usize, c: &usize| col(*c).total_cmp(&col(*a)).then(a.cmp(c));
        rows.sort_unstable_by(cmp);
        let mut chosen = rows[..t].to_vec();
        chosen.sort_unstable();
        for i in chosen {
            value -= col(i);
            grad_probs[i * m + j] = -1.0;
            window.push((i, j));
        }
    }
    Ok(BalanceCost { value, grad_probs, window })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub quality: f64,
    pub balance: f64,
    pub eta: f64,
    pub total: f64,
    pub window_mask: Vec<(usize, usize)>,
    pub per_point_quality: Vec<f64>,
}

/// Combined loss and its gradient with respect to the logits.
pub fn total_loss(
    probs: &BinProbabilities,
    targets: &NeighborBinDistribution,
    weights: Option<&[f64]>,
    eta: f64,
) -> Result<(LossBreakdown, Vec<f64>)> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(param_err(format!("eta must be finite and non-negative, got {eta}")));
    }
    let q = quality_cost(probs, targets, weights)?;
    let bal = balance_cost(probs)?;
    let mut grad = q.grad_logits;
    if eta != 0.0 {
        let from_balance = softmax_backward(probs, &bal.grad_probs);
        grad.iter_mut().zip(from_balance).for_each(|(g, h)| *g += eta * h);
    }
    let breakdown = LossBreakdown {
        quality: q.value,
        balance: bal.value,
        eta,
        total: q.value + eta * bal.value,
        window_mask: bal.window,
        per_point_quality: q.per_point,
    };
    Ok((breakdown, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, DistanceFn};
    use crate::knn::build_knn_matrix;

    fn probs(rows: &[&[f64]]) -> BinProbabilities {
        let m = rows[0].len();
        BinProbabilities::from_probs(rows.concat(), m).unwrap()
    }

    #[test]
    fn neighbor_histograms() {
        // Point 0's four neighbors in a 1-D layout.
        let ds = Dataset::new(vec![0.0, 1.0, 2.0, 3.0, 4.0], 1).unwrap();
        let knn = build_knn_matrix(&ds, 4, DistanceFn::Euclidean).unwrap();
        assert_eq!(knn.row(0), &[1, 2, 3, 4]);
        let ids = [1u32, 2, 3, 4];
        let out = probs(&[&[0.9, 0.1, 0.0, 0.0], &[0.6, 0.2, 0.1, 0.1], &[0.1, 0.8, 0.1, 0.0], &[0.0, 0.0, 0.3, 0.7]]);
        let t = neighbor_bin_distribution(&[0], &knn, &ids, &out, TargetMode::Argmax).unwrap();
        assert_eq!(t.row(0), &[0.5, 0.25, 0.0, 0.25]);

        let same = probs(&[&[0.0, 0.0, 1.0, 0.0][..]; 4]);
        let t = neighbor_bin_distribution(&[0], &knn, &ids, &same, TargetMode::Argmax).unwrap();
        assert_eq!(t.row(0), &[0.0, 0.0, 1.0, 0.0]);

        let soft = neighbor_bin_distribution(&[0], &knn, &ids, &out, TargetMode::SoftMean).unwrap();
        assert!((soft.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((soft.row(0)[0] - 0.4).abs() < 1e-12);

        let missing = neighbor_bin_distribution(
            &[0],
            &knn,
            &ids[..3],
            &probs(&[&[1.0, 0.0, 0.0, 0.0][..]; 3]),
            TargetMode::Argmax,
        );
        assert!(matches!(missing, Err(Error::Usage(_))));
    }

    #[test]
    fn quality_cases() {
        let one_hot = NeighborBinDistribution::from_rows(vec![0.0, 1.0, 0.0, 0.0], 4).unwrap();
        let q = quality_cost(&probs(&[&[0.0, 1.0, 0.0, 0.0]]), &one_hot, None).unwrap();
        assert_eq!(q.value, 0.0);

        let any = NeighborBinDistribution::from_rows(vec![0.1, 0.2, 0.3, 0.4], 4).unwrap();
        let q = quality_cost(&probs(&[&[0.25; 4]]), &any, None).unwrap();
        assert!((q.value - 4f64.ln()).abs() < 1e-12);

        // p_j = 0 where t_j > 0 through logits: finite log-softmax, no NaN.
        let extreme = BinProbabilities::from_logits(&[800.0, -800.0, 0.0, 0.0], 4);
        let q = quality_cost(&extreme, &one_hot, None).unwrap();
        assert!(q.value.is_finite() && q.value > 100.0);
    }

    #[test]
    fn zero_weight_silences_a_point() {
        let t = NeighborBinDistribution::from_rows(vec![1.0, 0.0, 0.0, 1.0], 2).unwrap();
        let p = probs(&[&[0.3, 0.7], &[0.6, 0.4]]);
        let q = quality_cost(&p, &t, Some(&[0.0, 1.0])).unwrap();
        assert_eq!(q.per_point[0], 0.0);
        assert_eq!(&q.grad_logits[..2], &[0.0, 0.0]);
        assert!((q.value - (-(0.4f64).ln()) / 2.0).abs() < 1e-12);
        assert!(quality_cost(&p, &t, Some(&[-1.0, 1.0])).is_err());
    }

    #[test]
    fn balance_cases() {
        let hard = probs(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[0.0, 1.0]]);
        let b = balance_cost(&hard).unwrap();
        assert_eq!(b.value, -4.0);
        assert_eq!(b.window.len(), 4);

        let lopsided = probs(&[&[1.0, 0.0][..]; 4]);
        assert_eq!(balance_cost(&lopsided).unwrap().value, -2.0);

        let uniform = probs(&[&[0.5, 0.5][..]; 4]);
        let b = balance_cost(&uniform).unwrap();
        assert_eq!(b.value, -2.0);
        // Ties resolve to the lowest rows.
        assert_eq!(b.window, vec![(0, 0), (1, 0), (0, 1), (1, 1)]);
        assert_eq!(b.grad_probs.iter().filter(|&&g| g != 0.0).count(), 4);

        assert!(balance_cost(&probs(&[&[0.2, 0.3, 0.5]])).is_err());
    }

    #[test]
    fn total_arithmetic() {
        let t = NeighborBinDistribution::from_rows(vec![1.0, 0.0, 0.0, 1.0], 2).unwrap();
        let p = probs(&[&[0.8, 0.2], &[0.1, 0.9]]);
        let (b, _) = total_loss(&p, &t, None, 7.0).unwrap();
        assert_eq!(b.total, b.quality + 7.0 * b.balance);
        let (b0, g0) = total_loss(&p, &t, None, 0.0).unwrap();
        assert_eq!(b0.total, b0.quality);
        let q = quality_cost(&p, &t, None).unwrap();
        assert_eq!(g0, q.grad_logits);
        assert!(total_loss(&p, &t, None, -1.0).is_err());
    }
}
