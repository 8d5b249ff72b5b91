//! Mini-batch training of a partitioner with Adam.

use std::io::Write;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::param_err;
use crate::index::build_partition;
use crate::knn::KnnMatrix;
use crate::loss::{neighbor_bin_distribution, total_loss, TargetMode};
use crate::model::{Architecture, PartitionerModel, Upstream};
use crate::{Error, Result};

const BATCH_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub eta: f64,
    pub epochs: usize,
    pub batch_fraction: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub k_prime: usize,
    pub seed: u64,
    /// Per-point quality weights (ensemble stages). Rescaled to mean 1.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub point_weights: Option<Vec<f64>>,
    pub target_mode: TargetMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta: 7.0,
            epochs: 100,
            batch_fraction: 0.04,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            k_prime: 10,
            seed: 0,
            point_weights: None,
            target_mode: TargetMode::Argmax,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(param_err(format!("eta must be non-negative, got {}", self.eta)));
        }
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return Err(param_err(format!("batch fraction must lie in (0, 1], got {}", self.batch_fraction)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(param_err("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return Err(param_err("adam betas must lie in [0, 1) and epsilon be positive"));
        }
        if let Some(w) = &self.point_weights {
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(param_err("point weights must be finite and non-negative"));
            }
            if !w.iter().any(|&v| v > 0.0) {
                return Err(param_err("at least one point weight must be positive"));
            }
        }
        Ok(())
    }

    /// Batches per epoch: `ceil(1 / batch_fraction)`.
    pub fn batches_per_epoch(&self) -> usize {
        (1.0 / self.batch_fraction - 1e-9).ceil().max(1.0) as usize
    }
}

/// `max(m, round(n * fraction))`, capped at `n`.
pub fn batch_size(n: usize, batch_fraction: f64, m: usize) -> usize {
    ((n as f64 * batch_fraction).round() as usize).max(m).min(n)
}

/// Uniform sample of `size` distinct indices from `0..n`.
pub fn sample_batch(n: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    rand::seq::index::sample(rng, n, size.min(n)).into_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl From<&TrainConfig> for AdamConfig {
    fn from(c: &TrainConfig) -> Self {
        Self { learning_rate: c.learning_rate, beta1: c.beta1, beta2: c.beta2, epsilon: c.epsilon }
    }
}

/// First and second moment estimates, one buffer per parameter group.
#[derive(Debug, Clone, Default)]
pub struct AdamState {
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update. Rejects non-finite gradients before
/// touching any parameter.
pub fn adam_step(params: &mut [&mut [f64]], grads: &[&[f64]], state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() || params.iter().zip(grads).any(|(p, g)| p.len() != g.len()) {
        return Err(param_err("parameter and gradient shapes differ"));
    }
    if let Some(group) = grads.iter().position(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFiniteGradient { group });
    }
    if state.first.is_empty() {
        state.first = grads.iter().map(|g| vec![0.0; g.len()]).collect();
        state.second = state.first.clone();
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (gi, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.first[gi];
        let v = &mut state.second[gi];
        for k in 0..p.len() {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            p[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub quality: f64,
    pub balance: f64,
    pub total: f64,
    pub max_bin: usize,
    pub min_bin: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Bin sizes of the final model over the whole training set.
    pub histogram: Vec<usize>,
    pub wall_clock: Duration,
    pub seed: u64,
}

impl TrainReport {
    /// One CSV row per epoch, preceded by the configuration as a `#` comment.
    pub fn write_csv(&self, mut out: impl Write, config_json: &str) -> std::io::Result<()> {
        writeln!(out, "# {config_json}")?;
        writeln!(out, "epoch,quality,balance,total,max_bin,min_bin")?;
        for e in &self.epochs {
            writeln!(out, "{},{},{},{},{},{}", e.epoch, e.quality, e.balance, e.total, e.max_bin, e.min_bin)?;
        }
        Ok(())
    }
}

fn normalized_weights(w: &[f64]) -> Vec<f64> {
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    w.iter().map(|v| v / mean).collect()
}

// `Instant` panics on wasm32-unknown-unknown, so the clock reads zero there.
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Stopwatch(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn elapsed(&self) -> Duration {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed();
        #[cfg(target_arch = "wasm32")]
        Duration::ZERO
    }
}

/// Trains a partitioner on `ds` against its k'-NN matrix.
///
/// Each epoch runs `ceil(1 / batch_fraction)` steps. A step samples a batch,
/// evaluates the current model on every neighbor of the batch to form the
/// targets, runs a training-mode forward/backward over the batch and applies
/// Adam. Results are bit-deterministic given `cfg.seed`.
pub fn train(
    ds: &Dataset,
    knn: &KnnMatrix,
    arch: &Architecture,
    cfg: &TrainConfig,
) -> Result<(PartitionerModel, TrainReport)> {
    let started = Stopwatch::start();
    cfg.validate()?;
    arch.validate()?;
    let n = ds.n();
    let m = arch.output_bins;
    if knn.n() != n {
        return Err(param_err(format!("k'-NN matrix covers {} points, dataset has {n}", knn.n())));
    }
    if knn.k_prime() != cfg.k_prime {
        return Err(param_err(format!("k'-NN matrix has k'={}, config asks for {}", knn.k_prime(), cfg.k_prime)));
    }
    if arch.input_dim != ds.d() {
        return Err(param_err(format!("model expects d={}, dataset has d={}", arch.input_dim, ds.d())));
    }
    if m > n {
        return Err(param_err(format!("cannot split {n} points into {m} bins")));
    }
    let weights = match &cfg.point_weights {
        Some(w) if w.len() != n => {
            return Err(param_err(format!("{} point weights for {n} points", w.len())));
        }
        Some(w) => Some(normalized_weights(w)),
        None => None,
    };

    let mut model = PartitionerModel::init(arch, cfg.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(BATCH_STREAM);
    let adam_cfg = AdamConfig::from(cfg);
    let mut adam = AdamState::default();
    let b = batch_size(n, cfg.batch_fraction, m);
    let steps = cfg.batches_per_epoch();
    let mut epochs = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let (mut q_sum, mut b_sum, mut t_sum) = (0.0, 0.0, 0.0);
        for step in 0..steps {
            let batch = sample_batch(n, b, &mut rng);
            let mut neighbor_ids: Vec<u32> = batch.iter().flat_map(|&i| knn.row(i).iter().copied()).collect();
            neighbor_ids.sort_unstable();
            neighbor_ids.dedup();
            let neighbor_rows: Vec<usize> = neighbor_ids.iter().map(|&j| j as usize).collect();
            let neighbor_probs = model.infer(&ds.gather(&neighbor_rows))?;
            let targets = neighbor_bin_distribution(&batch, knn, &neighbor_ids, &neighbor_probs, cfg.target_mode)?;

            let probs = model.forward(&ds.gather(&batch), true)?;
            let batch_weights: Option<Vec<f64>> = weights.as_ref().map(|w| batch.iter().map(|&i| w[i]).collect());
            let (loss, grad) = total_loss(&probs, &targets, batch_weights.as_deref(), cfg.eta)?;
            if !loss.total.is_finite() {
                return Err(Error::Diverged { epoch, batch: step, last_good: Box::new(model) });
            }
            let grads = model.backward(Upstream::Logits(&grad))?;
            let snapshot = model.clone();
            let result = {
                let mut params = model.parameters_mut();
                adam_step(&mut params, &grads.groups(), &mut adam, &adam_cfg)
            };
            if let Err(e) = result {
                return match e {
                    Error::NonFiniteGradient { .. } => {
                        Err(Error::Diverged { epoch, batch: step, last_good: Box::new(snapshot) })
                    }
                    other => Err(other),
                };
            }
            model.round_to_f32();
            q_sum += loss.quality;
            b_sum += loss.balance;
            t_sum += loss.total;
        }
        let hist = build_partition(&model, ds)?.histogram();
        let s = steps as f64;
        epochs.push(EpochStats {
            epoch: epoch + 1,
            quality: q_sum / s,
            balance: b_sum / s,
            total: t_sum / s,
            max_bin: hist.iter().copied().max().unwrap_or(0),
            min_bin: hist.iter().copied().min().unwrap_or(0),
        });
    }

    let histogram = build_partition(&model, ds)?.histogram();
    let report = TrainReport { epochs, histogram, wall_clock: started.elapsed(), seed: cfg.seed };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_blobs, generate_moons, DistanceFn};
    use crate::knn::build_knn_matrix;

    #[test]
    fn full_fraction_is_a_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut b = sample_batch(50, 50, &mut rng);
        b.sort_unstable();
        assert_eq!(b, (0..50).collect::<Vec<_>>());
        let s = sample_batch(100, 10, &mut rng);
        let mut u = s.clone();
        u.sort_unstable();
        u.dedup();
        assert_eq!(u.len(), 10);
        assert!(s.iter().all(|&i| i < 100));
    }

    #[test]
    fn inclusion_frequency_is_uniform() {
        let (n, draws) = (1000, 10_000);
        let size = batch_size(n, 0.04, 2);
        assert_eq!(size, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut counts = vec![0u32; n];
        for _ in 0..draws {
            for i in sample_batch(n, size, &mut rng) {
                counts[i] += 1;
            }
        }
        let p = 0.04;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for &c in &counts {
            assert!((c as f64 - draws as f64 * p).abs() <= 4.0 * sigma, "count {c}");
        }
        let outside = counts.iter().filter(|&&c| (c as f64 - draws as f64 * p).abs() > 3.0 * sigma).count();
        // About 0.27% of indices are expected outside 3 sigma.
        assert!(outside <= 10, "{outside} indices outside 3 sigma");
    }

    #[test]
    fn batch_size_clamps_to_bins() {
        assert_eq!(batch_size(100, 0.04, 16), 16);
        assert_eq!(batch_size(10, 1.0, 16), 10);
        let cfg = TrainConfig { batch_fraction: 0.04, ..Default::default() };
        assert_eq!(cfg.batches_per_epoch(), 25);
        let cfg = TrainConfig { batch_fraction: 0.3, ..Default::default() };
        assert_eq!(cfg.batches_per_epoch(), 4);
        let cfg = TrainConfig { batch_fraction: 1.0, ..Default::default() };
        assert_eq!(cfg.batches_per_epoch(), 1);
    }

    #[test]
    fn adam_first_step_closed_form() {
        let cfg = AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 };
        let mut state = AdamState::default();
        let mut p = [0.5, -0.25];
        adam_step(&mut [&mut p[..]], &[&[1.0, -3.0]], &mut state, &cfg).unwrap();
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        assert!((p[0] - (0.5 - 1e-3 / (1.0 + 1e-8))).abs() < 1e-15);
        assert!((p[1] - (-0.25 + 1e-3 * 3.0 / (3.0 + 1e-8))).abs() < 1e-15);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn adam_zero_gradient_and_non_finite() {
        let cfg = AdamConfig { learning_rate: 1e-2, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 };
        let mut state = AdamState::default();
        let mut p = [1.0, 2.0];
        for _ in 0..5 {
            adam_step(&mut [&mut p[..]], &[&[0.0, 0.0]], &mut state, &cfg).unwrap();
        }
        assert_eq!(p, [1.0, 2.0]);
        let err = adam_step(&mut [&mut p[..]], &[&[f64::NAN, 0.0]], &mut state, &cfg);
        assert!(matches!(err, Err(Error::NonFiniteGradient { group: 0 })));
        assert_eq!(p, [1.0, 2.0]);
    }

    #[test]
    fn zero_epochs_returns_init() {
        let ds = generate_moons(60, 0.05, 0).unwrap();
        let knn = build_knn_matrix(&ds, 5, DistanceFn::Euclidean).unwrap();
        let arch = Architecture::mlp(2, 4);
        let cfg = TrainConfig { epochs: 0, k_prime: 5, seed: 9, ..Default::default() };
        let (model, report) = train(&ds, &knn, &arch, &cfg).unwrap();
        assert_eq!(model, PartitionerModel::init(&arch, 9).unwrap());
        assert!(report.epochs.is_empty());
        assert_eq!(report.histogram.iter().sum::<usize>(), 60);
    }

    #[test]
    fn training_is_deterministic() {
        let ds = generate_moons(200, 0.05, 1).unwrap();
        let knn = build_knn_matrix(&ds, 10, DistanceFn::Euclidean).unwrap();
        let arch = Architecture::mlp(2, 4);
        let cfg = TrainConfig { epochs: 5, batch_fraction: 0.2, seed: 4, ..Default::default() };
        let (a, ra) = train(&ds, &knn, &arch, &cfg).unwrap();
        let (b, rb) = train(&ds, &knn, &arch, &cfg).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_eq!(ra.epochs, rb.epochs);
        assert_eq!(ra.histogram, build_partition(&a, &ds).unwrap().histogram());
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let ds = generate_moons(40, 0.05, 1).unwrap();
        let knn = build_knn_matrix(&ds, 5, DistanceFn::Euclidean).unwrap();
        let arch = Architecture::mlp(2, 4);
        let cfg = TrainConfig { k_prime: 10, ..Default::default() };
        assert!(train(&ds, &knn, &arch, &cfg).is_err());
        let cfg = TrainConfig { k_prime: 5, eta: -1.0, ..Default::default() };
        assert!(train(&ds, &knn, &arch, &cfg).is_err());
        let cfg = TrainConfig { k_prime: 5, point_weights: Some(vec![0.0; 40]), ..Default::default() };
        assert!(train(&ds, &knn, &arch, &cfg).is_err());
        assert!(train(&ds, &knn, &Architecture::mlp(3, 4), &TrainConfig { k_prime: 5, ..Default::default() }).is_err());
    }

    #[test]
    fn blobs_training_reduces_loss() {
        let ds = generate_blobs(2000, 16, 4, 10.0, 1.0, 1).unwrap();
        let knn = build_knn_matrix(&ds, 10, DistanceFn::Euclidean).unwrap();
        let arch = Architecture::mlp(16, 4);
        let cfg = TrainConfig { seed: 1, ..Default::default() };
        let (_, report) = train(&ds, &knn, &arch, &cfg).unwrap();
        let first = report.epochs.first().unwrap().total;
        let last = report.epochs.last().unwrap().total;
        assert!(last < first, "first {first}, last {last}");
    }
}
