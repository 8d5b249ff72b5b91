//! The trainable partitioner: a logistic-regression or one-hidden-layer MLP
//! map from points to a softmax distribution over bins, with a hand-written
//! backward pass.
//!
//! Parameters are kept on the f32 grid (initialization samples f32 values and
//! the trainer re-rounds after each update) while all arithmetic runs in f64.
//! That keeps the float32 model file an exact image of the in-memory model.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::binio::{Reader, Writer};
use crate::error::param_err;
use crate::{Error, Result};

const MODEL_MAGIC: &[u8; 8] = b"USPMODEL";
const MODEL_VERSION: u32 = 1;
const DROPOUT_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    LogisticRegression,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub kind: ArchKind,
    pub input_dim: usize,
    /// Ignored for logistic regression.
    pub hidden_dim: usize,
    pub output_bins: usize,
    /// Ignored for logistic regression.
    pub dropout_rate: f64,
}

impl Architecture {
    pub const DEFAULT_HIDDEN: usize = 128;
    pub const DEFAULT_DROPOUT: f64 = 0.1;

    pub fn mlp(input_dim: usize, output_bins: usize) -> Self {
        Self {
            kind: ArchKind::Mlp,
            input_dim,
            hidden_dim: Self::DEFAULT_HIDDEN,
            output_bins,
            dropout_rate: Self::DEFAULT_DROPOUT,
        }
    }

    pub fn logistic(input_dim: usize, output_bins: usize) -> Self {
        Self { kind: ArchKind::LogisticRegression, input_dim, hidden_dim: 0, output_bins, dropout_rate: 0.0 }
    }

    pub fn with_output_bins(&self, output_bins: usize) -> Self {
        Self { output_bins, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(param_err("input dimension must be at least 1"));
        }
        if self.output_bins < 2 {
            return Err(param_err(format!("need at least 2 bins, got {}", self.output_bins)));
        }
        if self.kind == ArchKind::Mlp {
            if self.hidden_dim == 0 {
                return Err(param_err("mlp hidden width must be at least 1"));
            }
            if !(0.0..1.0).contains(&self.dropout_rate) {
                return Err(param_err(format!("dropout rate {} outside [0, 1)", self.dropout_rate)));
            }
        }
        Ok(())
    }

    /// (fan_in, fan_out) of each dense layer, input to output.
    fn layer_shapes(&self) -> Vec<(usize, usize)> {
        match self.kind {
            ArchKind::LogisticRegression => vec![(self.input_dim, self.output_bins)],
            ArchKind::Mlp => vec![(self.input_dim, self.hidden_dim), (self.hidden_dim, self.output_bins)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Dense {
    /// `fan_out x fan_in`, row-major.
    weights: Vec<f64>,
    bias: Vec<f64>,
    fan_in: usize,
    fan_out: usize,
}

impl Dense {
    fn forward(&self, x: &[f64], rows: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(rows * self.fan_out);
        for r in 0..rows {
            let xr = &x[r * self.fan_in..(r + 1) * self.fan_in];
            for (o, w) in self.weights.chunks_exact(self.fan_in).enumerate() {
                let dot: f64 = w.iter().zip(xr).map(|(a, b)| a * b).sum();
                out.push(self.bias[o] + dot);
            }
        }
        out
    }

    /// Accumulates dW, db for this layer and, if requested, returns dX.
    fn backward(&self, x: &[f64], dz: &[f64], rows: usize, want_dx: bool) -> (LayerGrad, Option<Vec<f64>>) {
        let mut g = LayerGrad { weights: vec![0.0; self.weights.len()], bias: vec![0.0; self.fan_out] };
        let mut dx = want_dx.then(|| vec![0.0; rows * self.fan_in]);
        for r in 0..rows {
            let xr = &x[r * self.fan_in..(r + 1) * self.fan_in];
            let dzr = &dz[r * self.fan_out..(r + 1) * self.fan_out];
            for (o, &d) in dzr.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.bias[o] += d;
                let gw = &mut g.weights[o * self.fan_in..(o + 1) * self.fan_in];
                gw.iter_mut().zip(xr).for_each(|(a, &xi)| *a += d * xi);
                if let Some(dx) = dx.as_mut() {
                    let w = &self.weights[o * self.fan_in..(o + 1) * self.fan_in];
                    let dxr = &mut dx[r * self.fan_in..(r + 1) * self.fan_in];
                    dxr.iter_mut().zip(w).for_each(|(a, &wi)| *a += d * wi);
                }
            }
        }
        (g, dx)
    }
}

/// Row-stochastic `rows x m` matrix of bin probabilities, carried together
/// with the matching log-probabilities so cross-entropy never takes `ln 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinProbabilities {
    probs: Vec<f64>,
    log_probs: Vec<f64>,
    rows: usize,
    m: usize,
}

impl BinProbabilities {
    /// Max-subtracted softmax of each logit row.
    pub fn from_logits(logits: &[f64], m: usize) -> Self {
        assert!(m > 0 && logits.len().is_multiple_of(m), "logits do not split into rows of {m}");
        let rows = logits.len() / m;
        let mut probs = Vec::with_capacity(logits.len());
        let mut log_probs = Vec::with_capacity(logits.len());
        for z in logits.chunks_exact(m) {
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
            let lse = max + sum.ln();
            for &v in z {
                let lp = v - lse;
                log_probs.push(lp);
                probs.push(lp.exp());
            }
        }
        Self { probs, log_probs, rows, m }
    }

    /// Wraps explicit probability rows. Each row must be a distribution.
    pub fn from_probs(probs: Vec<f64>, m: usize) -> Result<Self> {
        if m == 0 || !probs.len().is_multiple_of(m) {
            return Err(param_err(format!("{} values do not split into rows of {m}", probs.len())));
        }
        for (i, row) in probs.chunks_exact(m).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-6 {
                return Err(Error::Input(format!("row {i} is not a probability distribution")));
            }
        }
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        let rows = probs.len() / m;
        Ok(Self { probs, log_probs, rows, m })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.m..(i + 1) * self.m]
    }

    pub fn log_row(&self, i: usize) -> &[f64] {
        &self.log_probs[i * self.m..(i + 1) * self.m]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Most probable bin of row `i`, lowest id on ties.
    pub fn argmax(&self, i: usize) -> usize {
        argmax(self.row(i))
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &p) in row.iter().enumerate().skip(1) {
        if p > row[best] {
            best = j;
        }
    }
    best
}

/// Bins of `row` ordered by descending probability, ties by ascending id,
/// truncated to `take`.
pub(crate) fn rank_bins(row: &[f64], take: usize) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = row.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(take);
    ranked
}

/// Pulls a gradient with respect to softmax outputs back to the logits.
pub fn softmax_backward(probs: &BinProbabilities, grad_probs: &[f64]) -> Vec<f64> {
    assert_eq!(grad_probs.len(), probs.rows * probs.m);
    let mut out = Vec::with_capacity(grad_probs.len());
    for (p, g) in probs.probs.chunks_exact(probs.m).zip(grad_probs.chunks_exact(probs.m)) {
        let inner: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
        out.extend(p.iter().zip(g).map(|(pj, gj)| pj * (gj - inner)));
    }
    out
}

/// Gradient fed into [`PartitionerModel::backward`].
#[derive(Debug, Clone, Copy)]
pub enum Upstream<'a> {
    Logits(&'a [f64]),
    Probs(&'a [f64]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter gradients, one entry per dense layer (input side first).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    /// Flat views in the same order as [`PartitionerModel::parameters`].
    pub fn groups(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()]).collect()
    }
}

#[derive(Debug, Clone)]
struct Trace {
    rows: usize,
    input: Vec<f64>,
    /// Hidden pre-activations (mlp only).
    hidden_pre: Vec<f64>,
    /// Per-unit multiplier after ReLU: 0 for dropped units, 1/(1-rate) kept.
    mask: Vec<f64>,
    /// Hidden layer output fed into the final layer (mlp only).
    hidden: Vec<f64>,
    output: BinProbabilities,
}

#[derive(Debug, Clone)]
pub struct PartitionerModel {
    arch: Architecture,
    layers: Vec<Dense>,
    seed: u64,
    rng: ChaCha8Rng,
    trace: Option<Trace>,
}

impl PartialEq for PartitionerModel {
    /// Models are equal when architecture and every parameter bit agree.
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch
            && self
                .parameters()
                .iter()
                .zip(other.parameters())
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()))
    }
}

impl PartitionerModel {
    /// Glorot-uniform weights, zero biases.
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = arch
            .layer_shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
                let weights = (0..fan_in * fan_out).map(|_| f64::from(rng.gen_range(-limit..=limit))).collect();
                Dense { weights, bias: vec![0.0; fan_out], fan_in, fan_out }
            })
            .collect();
        let mut dropout_rng = ChaCha8Rng::seed_from_u64(seed);
        dropout_rng.set_stream(DROPOUT_STREAM);
        Ok(Self { arch: arch.clone(), layers, seed, rng: dropout_rng, trace: None })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn num_bins(&self) -> usize {
        self.arch.output_bins
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Weight and bias slices, layer by layer from the input side.
    pub fn parameters(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()]).collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()]).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.parameters().iter().map(|g| g.len()).sum()
    }

    /// Rounds every parameter to the nearest f32.
    pub fn round_to_f32(&mut self) {
        for g in self.parameters_mut() {
            g.iter_mut().for_each(|v| *v = *v as f32 as f64);
        }
    }

    fn check_batch(&self, batch: &[f64]) -> Result<usize> {
        let d = self.arch.input_dim;
        if !batch.len().is_multiple_of(d) {
            return Err(Error::Input(format!("batch length {} is not a multiple of d={d}", batch.len())));
        }
        if batch.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite value in model input".into()));
        }
        Ok(batch.len() / d)
    }

    /// Evaluation-mode forward pass: no dropout, no recorded state.
    pub fn infer(&self, batch: &[f64]) -> Result<BinProbabilities> {
        let rows = self.check_batch(batch)?;
        let logits = match self.arch.kind {
            ArchKind::LogisticRegression => self.layers[0].forward(batch, rows),
            ArchKind::Mlp => {
                let mut h = self.layers[0].forward(batch, rows);
                h.iter_mut().for_each(|v| *v = v.max(0.0));
                self.layers[1].forward(&h, rows)
            }
        };
        Ok(BinProbabilities::from_logits(&logits, self.arch.output_bins))
    }

    /// Forward pass that records activations for [`backward`](Self::backward).
    /// In training mode dropout masks are drawn from the model's own stream.
    pub fn forward(&mut self, batch: &[f64], training: bool) -> Result<BinProbabilities> {
        let rows = self.check_batch(batch)?;
        let (hidden_pre, mask, hidden, logits) = match self.arch.kind {
            ArchKind::LogisticRegression => (Vec::new(), Vec::new(), Vec::new(), self.layers[0].forward(batch, rows)),
            ArchKind::Mlp => {
                let pre = self.layers[0].forward(batch, rows);
                let rate = self.arch.dropout_rate;
                let mask: Vec<f64> = if training && rate > 0.0 {
                    let keep = 1.0 / (1.0 - rate);
                    (0..pre.len()).map(|_| if self.rng.gen::<f64>() < rate { 0.0 } else { keep }).collect()
                } else {
                    vec![1.0; pre.len()]
                };
                let hidden: Vec<f64> = pre.iter().zip(&mask).map(|(v, k)| v.max(0.0) * k).collect();
                let logits = self.layers[1].forward(&hidden, rows);
                (pre, mask, hidden, logits)
            }
        };
        let output = BinProbabilities::from_logits(&logits, self.arch.output_bins);
        self.trace = Some(Trace { rows, input: batch.to_vec(), hidden_pre, mask, hidden, output: output.clone() });
        Ok(output)
    }

    /// Exact gradients of the last recorded forward pass.
    pub fn backward(&self, upstream: Upstream<'_>) -> Result<Gradients> {
        let trace = self
            .trace
            .as_ref()
            .ok_or_else(|| Error::Usage("backward called without a recorded forward pass".into()))?;
        let m = self.arch.output_bins;
        let expected = trace.rows * m;
        let dz = match upstream {
            Upstream::Logits(g) | Upstream::Probs(g) if g.len() != expected => {
                return Err(Error::Usage(format!(
                    "upstream gradient has {} entries, forward produced {expected}",
                    g.len()
                )));
            }
            Upstream::Logits(g) => g.to_vec(),
            Upstream::Probs(g) => softmax_backward(&trace.output, g),
        };
        let layers = match self.arch.kind {
            ArchKind::LogisticRegression => {
                vec![self.layers[0].backward(&trace.input, &dz, trace.rows, false).0]
            }
            ArchKind::Mlp => {
                let (top, dh) = self.layers[1].backward(&trace.hidden, &dz, trace.rows, true);
                let mut dpre = dh.expect("requested");
                for ((g, &pre), &k) in dpre.iter_mut().zip(&trace.hidden_pre).zip(&trace.mask) {
                    *g = if pre > 0.0 { *g * k } else { 0.0 };
                }
                let (bottom, _) = self.layers[0].backward(&trace.input, &dpre, trace.rows, false);
                vec![bottom, top]
            }
        };
        Ok(Gradients { layers })
    }

    /// The `m_prime` most probable bins for `point`, most probable first,
    /// ties by ascending bin id.
    pub fn predict_bins(&self, point: &[f64], m_prime: usize) -> Result<Vec<(usize, f64)>> {
        if m_prime == 0 || m_prime > self.arch.output_bins {
            return Err(param_err(format!("m' must satisfy 1 <= m' <= {}, got {m_prime}", self.arch.output_bins)));
        }
        if point.len() != self.arch.input_dim {
            return Err(Error::Input(format!(
                "point has {} coordinates, model expects {}",
                point.len(),
                self.arch.input_dim
            )));
        }
        let probs = self.infer(point)?;
        Ok(rank_bins(probs.row(0), m_prime))
    }

    /// Serialized form: magic, version, architecture, seed and dropout stream
    /// position, then every parameter as little-endian f32, row-major, layer
    /// by layer (weights before bias).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(MODEL_MAGIC);
        w.u32(MODEL_VERSION);
        w.u8(match self.arch.kind {
            ArchKind::LogisticRegression => 0,
            ArchKind::Mlp => 1,
        });
        w.u32(self.arch.input_dim as u32);
        w.u32(self.arch.hidden_dim as u32);
        w.u32(self.arch.output_bins as u32);
        w.f64(self.arch.dropout_rate);
        w.u64(self.seed);
        w.u64(self.rng.get_stream());
        let pos = self.rng.get_word_pos();
        w.u64(pos as u64);
        w.u64((pos >> 64) as u64);
        for g in self.parameters() {
            g.iter().for_each(|&v| w.f32(v as f32));
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let model = Self::read(&mut r)?;
        if !r.is_empty() {
            return Err(r.error(format!("{} trailing bytes after model", r.remaining())));
        }
        Ok(model)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        r.expect_magic(MODEL_MAGIC)?;
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(r.error(format!("unsupported model version {version}")));
        }
        let kind = match r.u8()? {
            0 => ArchKind::LogisticRegression,
            1 => ArchKind::Mlp,
            other => return Err(r.error(format!("unknown architecture tag {other}"))),
        };
        let arch = Architecture {
            kind,
            input_dim: r.u32()? as usize,
            hidden_dim: r.u32()? as usize,
            output_bins: r.u32()? as usize,
            dropout_rate: r.f64()?,
        };
        arch.validate().map_err(|e| r.error(e.to_string()))?;
        let seed = r.u64()?;
        let stream = r.u64()?;
        let pos = u128::from(r.u64()?) | (u128::from(r.u64()?) << 64);
        let mut model = Self::init(&arch, seed)?;
        model.rng.set_stream(stream);
        model.rng.set_word_pos(pos);
        for g in model.parameters_mut() {
            for v in g.iter_mut() {
                let at = r.offset();
                let x = r.f32()?;
                if !x.is_finite() {
                    return Err(Error::Format { offset: at, message: "non-finite parameter".into() });
                }
                *v = f64::from(x);
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
