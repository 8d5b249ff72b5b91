//! Lloyd's k-means with k-means++ seeding, exposed through the same probing
//! interface as the learned indexes (bins ranked by centroid distance).

use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{squared_euclidean, Dataset, DistanceFn};
use crate::error::param_err;
use crate::index::{check_probe, AnnIndex, Partition};
use crate::parallel::map_indexed;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansPartition {
    /// `m x d`, row-major.
    pub centroids: Vec<f64>,
    pub partition: Partition,
    pub iterations: usize,
}

impl KMeansPartition {
    pub fn m(&self) -> usize {
        self.partition.m()
    }

    pub fn centroid(&self, j: usize) -> &[f64] {
        let d = self.centroids.len() / self.m();
        &self.centroids[j * d..(j + 1) * d]
    }

    /// Centroid ids by ascending squared distance to `q`, ties by id.
    pub fn ranked_centroids(&self, q: &[f64]) -> Vec<usize> {
        let mut scored: Vec<(f64, usize)> =
            (0..self.m()).map(|j| (squared_euclidean(q, self.centroid(j)), j)).collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        scored.into_iter().map(|(_, j)| j).collect()
    }
}

fn nearest(p: &[f64], centroids: &[f64], d: usize) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for (j, c) in centroids.chunks_exact(d).enumerate() {
        let dist = squared_euclidean(p, c);
        if dist < best.1 {
            best = (j as u32, dist);
        }
    }
    best
}

fn plus_plus_seeds(ds: &Dataset, m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = ds.d();
    let mut centroids = Vec::with_capacity(m * d);
    let mut chosen = vec![false; ds.n()];
    let first = rng.gen_range(0..ds.n());
    chosen[first] = true;
    centroids.extend_from_slice(ds.point(first));
    let mut closest: Vec<f64> = ds.rows().map(|p| squared_euclidean(p, ds.point(first))).collect();
    while centroids.len() < m * d {
        let next = match WeightedIndex::new(&closest) {
            Ok(dist) => dist.sample(rng),
            // Every remaining point coincides with a centroid.
            Err(_) => {
                let free: Vec<usize> = (0..ds.n()).filter(|&i| !chosen[i]).collect();
                free[rng.gen_range(0..free.len())]
            }
        };
        chosen[next] = true;
        let c = ds.point(next).to_vec();
        for (slot, p) in closest.iter_mut().zip(ds.rows()) {
            *slot = slot.min(squared_euclidean(p, &c));
        }
        centroids.extend(c);
    }
    centroids
}

/// Total within-cluster squared distance of an assignment.
pub fn inertia(ds: &Dataset, centroids: &[f64], assignment: &[u32]) -> f64 {
    let d = ds.d();
    ds.rows()
        .zip(assignment)
        .map(|(p, &b)| squared_euclidean(p, &centroids[b as usize * d..(b as usize + 1) * d]))
        .sum()
}

/// Recomputes centroids as cluster means. An empty cluster takes the point
/// of the largest cluster that lies farthest from that cluster's centroid.
pub(crate) fn update_centroids(ds: &Dataset, m: usize, assignment: &mut [u32], centroids: &mut [f64]) {
    let d = ds.d();
    loop {
        let mut counts = vec![0usize; m];
        assignment.iter().for_each(|&b| counts[b as usize] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            break;
        };
        let largest = (0..m).max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a))).expect("m > 0");
        if counts[largest] < 2 {
            break;
        }
        let lc = centroids[largest * d..(largest + 1) * d].to_vec();
        let victim = (0..ds.n())
            .filter(|&i| assignment[i] as usize == largest)
            .max_by(|&a, &b| {
                squared_euclidean(ds.point(a), &lc).total_cmp(&squared_euclidean(ds.point(b), &lc)).then(b.cmp(&a))
            })
            .expect("largest cluster is non-empty");
        assignment[victim] = empty as u32;
    }
    let mut sums = vec![0.0; m * d];
    let mut counts = vec![0usize; m];
    for (p, &b) in ds.rows().zip(assignment.iter()) {
        counts[b as usize] += 1;
        sums[b as usize * d..(b as usize + 1) * d].iter_mut().zip(p).for_each(|(s, v)| *s += v);
    }
    for j in 0..m {
        if counts[j] > 0 {
            for (c, s) in centroids[j * d..(j + 1) * d].iter_mut().zip(&sums[j * d..(j + 1) * d]) {
                *c = s / counts[j] as f64;
            }
        }
    }
}

fn assign_all(ds: &Dataset, centroids: &[f64]) -> Vec<u32> {
    map_indexed(ds.n(), |i| nearest(ds.point(i), centroids, ds.d()).0)
}

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing or `max_iters` updates have run. The returned assignment always
/// maps each point to its nearest returned centroid.
pub fn kmeans_partition(ds: &Dataset, m: usize, max_iters: usize, seed: u64) -> Result<KMeansPartition> {
    if m == 0 || m > ds.n() {
        return Err(param_err(format!("k-means needs 1 <= m <= n, got m={m}, n={}", ds.n())));
    }
    if max_iters == 0 {
        return Err(param_err("max_iters must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seeds(ds, m, &mut rng);
    let mut assignment = assign_all(ds, &centroids);
    let mut iterations = 0;
    while iterations < max_iters {
        update_centroids(ds, m, &mut assignment, &mut centroids);
        iterations += 1;
        let next = assign_all(ds, &centroids);
        if next == assignment {
            break;
        }
        assignment = next;
    }
    let assignment = assign_all(ds, &centroids);
    Ok(KMeansPartition { centroids, partition: Partition::from_assignment(assignment, m)?, iterations })
}

/// The k-means baseline as a queryable index.
#[derive(Debug, Clone)]
pub struct KMeansIndex {
    pub kmeans: KMeansPartition,
    dataset: Arc<Dataset>,
    distance: DistanceFn,
}

impl KMeansIndex {
    pub fn new(kmeans: KMeansPartition, dataset: Arc<Dataset>, distance: DistanceFn) -> Result<Self> {
        if kmeans.partition.n() != dataset.n() {
            return Err(param_err("k-means partition and dataset differ in size"));
        }
        Ok(Self { kmeans, dataset, distance })
    }

    pub fn build(dataset: Arc<Dataset>, m: usize, max_iters: usize, seed: u64, distance: DistanceFn) -> Result<Self> {
        let kmeans = kmeans_partition(&dataset, m, max_iters, seed)?;
        Self::new(kmeans, dataset, distance)
    }
}

impl AnnIndex for KMeansIndex {
    fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    fn distance(&self) -> DistanceFn {
        self.distance
    }

    fn num_bins(&self) -> usize {
        self.kmeans.m()
    }

    fn candidate_set(&self, q: &[f64], m_prime: usize) -> Result<Vec<u32>> {
        check_probe(m_prime, self.num_bins())?;
        Ok(self
            .kmeans
            .ranked_centroids(q)
            .into_iter()
            .take(m_prime)
            .flat_map(|b| self.kmeans.partition.bin(b).iter().copied())
            .collect())
    }
}
