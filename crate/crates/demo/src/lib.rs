//! Browser playground: train a partitioner on a 2-d toy dataset, paint the
//! bins it induces, probe them with a query and compare recall against
//! k-means.
//!
//! Everything here is plain Rust so it can be tested natively; the
//! `wasm_bindgen` attributes only add the JS glue on wasm targets. Errors
//! cross the boundary as strings, which JS receives as thrown values.

use std::sync::Arc;

use serde::Serialize;
use uspann::prelude::*;
use wasm_bindgen::prelude::wasm_bindgen;

const K_PRIME: usize = 10;
const KMEANS_ITERS: usize = 100;

type Outcome<T> = std::result::Result<T, String>;

fn js(e: Error) -> String {
    e.to_string()
}

struct Trained {
    learned: FlatIndex,
    kmeans: KMeansIndex,
}

impl Trained {
    fn pick(&self, method: &str) -> Outcome<&dyn AnnIndex> {
        match method {
            "usp" => Ok(&self.learned),
            "kmeans" => Ok(&self.kmeans),
            other => Err(format!("unknown method {other:?}, expected usp or kmeans")),
        }
    }

    fn top_bin(&self, method: &str, p: &[f64]) -> Outcome<u32> {
        let bin = match method {
            "usp" => self.learned.model().predict_bins(p, 1).map_err(js)?[0].0,
            "kmeans" => self.kmeans.kmeans.ranked_centroids(p)[0],
            other => return Err(format!("unknown method {other:?}, expected usp or kmeans")),
        };
        Ok(bin as u32)
    }
}

#[derive(Serialize)]
struct Probe {
    candidates: Vec<u32>,
    found: Vec<u32>,
    exact: Vec<u32>,
}

#[derive(Serialize)]
struct Curves {
    usp: Vec<CurvePoint>,
    kmeans: Vec<CurvePoint>,
}

/// A standardized 2-d dataset split into indexed points and held-out queries.
#[wasm_bindgen]
pub struct Playground {
    train: Arc<Dataset>,
    queries: Dataset,
    knn: Option<KnnMatrix>,
    trained: Option<Trained>,
}

#[wasm_bindgen]
impl Playground {
    /// `kind` is `moons`, `circles` or `blobs`; a fifth of the points are held
    /// out as queries for the recall curves.
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, n: usize, noise: f64, seed: u32) -> Outcome<Playground> {
        let seed = u64::from(seed);
        let ds = match kind {
            "moons" => generate_moons(n, noise, seed),
            "circles" => generate_circles(n, 0.5, noise, seed),
            "blobs" => generate_blobs(n, 2, 5, 6.0, 1.0 + 10.0 * noise, seed),
            other => return Err(format!("unknown dataset {other:?}")),
        }
        .map_err(js)?;
        let (train, queries) = split(&ds, 0.2, seed).map_err(js)?;
        let (train, scaler) = standardize(&train).map_err(js)?;
        let queries = scaler.apply(&queries).map_err(js)?;
        Ok(Playground { train: Arc::new(train), queries, knn: None, trained: None })
    }

    /// Indexed points as interleaved x, y coordinates.
    pub fn points(&self) -> Vec<f64> {
        self.train.points().to_vec()
    }

    pub fn labels(&self) -> Vec<u32> {
        self.train.labels().map(<[u32]>::to_vec).unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.train.n()
    }

    pub fn is_empty(&self) -> bool {
        self.train.n() == 0
    }

    /// Trains an MLP partitioner and a k-means baseline with `m` bins and
    /// returns the learned bin of every indexed point.
    pub fn train(&mut self, m: usize, epochs: usize, eta: f64, seed: u32) -> Outcome<Vec<u32>> {
        if self.knn.is_none() {
            self.knn = Some(build_knn_matrix(&self.train, K_PRIME, DistanceFn::Euclidean).map_err(js)?);
        }
        let knn = self.knn.as_ref().unwrap();
        let seed = u64::from(seed);
        let cfg = TrainConfig { eta, epochs, seed, k_prime: K_PRIME, ..TrainConfig::default() };
        let (model, _) = train(&self.train, knn, &Architecture::mlp(2, m), &cfg).map_err(js)?;
        let learned = FlatIndex::build(model, self.train.clone(), DistanceFn::Euclidean).map_err(js)?;
        let kmeans =
            KMeansIndex::build(self.train.clone(), m, KMEANS_ITERS, seed, DistanceFn::Euclidean).map_err(js)?;
        let assignment = learned.partition().assignment().to_vec();
        self.trained = Some(Trained { learned, kmeans });
        Ok(assignment)
    }

    fn trained(&self) -> Outcome<&Trained> {
        self.trained.as_ref().ok_or_else(|| "train a partition first".to_string())
    }

    fn partition(&self, method: &str) -> Outcome<&Partition> {
        let trained = self.trained()?;
        match method {
            "usp" => Ok(trained.learned.partition()),
            "kmeans" => Ok(&trained.kmeans.kmeans.partition),
            other => Err(format!("unknown method {other:?}, expected usp or kmeans")),
        }
    }

    /// Bin of every indexed point under `method`.
    pub fn assignment(&self, method: &str) -> Outcome<Vec<u32>> {
        Ok(self.partition(method)?.assignment().to_vec())
    }

    /// Bin sizes of `method` over the indexed points.
    pub fn histogram(&self, method: &str) -> Outcome<Vec<u32>> {
        Ok(self.partition(method)?.histogram().into_iter().map(|c| c as u32).collect())
    }

    /// Top-ranked bin at the centre of every cell of a `cols` x `rows` grid
    /// over `[x0, x1] x [y0, y1]`, row by row from `y0`.
    #[allow(clippy::too_many_arguments)]
    pub fn bin_map(
        &self,
        method: &str,
        cols: usize,
        rows: usize,
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
    ) -> Outcome<Vec<u32>> {
        let trained = self.trained()?;
        let mut out = Vec::with_capacity(cols * rows);
        for r in 0..rows {
            let y = y0 + (y1 - y0) * (r as f64 + 0.5) / rows as f64;
            for c in 0..cols {
                let x = x0 + (x1 - x0) * (c as f64 + 0.5) / cols as f64;
                out.push(trained.top_bin(method, &[x, y])?);
            }
        }
        Ok(out)
    }

    /// Candidate set of the `m_prime` best bins at `(x, y)`, the `k` nearest
    /// points found inside it and the exact `k` nearest, as JSON.
    pub fn probe(&self, method: &str, x: f64, y: f64, k: usize, m_prime: usize) -> Outcome<String> {
        let index = self.trained()?.pick(method)?;
        let q = [x, y];
        let candidates = index.candidate_set(&q, m_prime).map_err(js)?;
        let found = index.query(&q, k, m_prime).map_err(js)?.ids;
        let exact = index.query(&q, k, index.num_bins()).map_err(js)?.ids;
        serde_json::to_string(&Probe { candidates, found, exact }).map_err(|e| e.to_string())
    }

    /// Recall@k against mean candidate count for every `m'` of both methods,
    /// as JSON.
    pub fn curves(&self, k: usize) -> Outcome<String> {
        let trained = self.trained()?;
        let gt = ground_truth(&self.train, &self.queries, k, DistanceFn::Euclidean).map_err(js)?;
        let m_primes: Vec<usize> = (1..=trained.learned.num_bins()).collect();
        let sweep = |index: &dyn AnnIndex| sweep_curve(index, &self.queries, &gt, k, &m_primes).map_err(js);
        let curves = Curves { usp: sweep(&trained.learned)?, kmeans: sweep(&trained.kmeans)? };
        serde_json::to_string(&curves).map_err(|e| e.to_string())
    }
}
