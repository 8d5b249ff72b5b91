//! Exact k'-NN matrices (the training signal) and query ground truth.
//!
//! Rankings always use squared Euclidean distance with ties broken by lower
//! point index, so both distance functions produce identical neighbor lists.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use crate::binio::{Reader, Writer};
use crate::data::{squared_euclidean, Dataset, DistanceFn};
use crate::error::param_err;
use crate::parallel::map_indexed;
use crate::{Error, Result};

const CACHE_MAGIC: &[u8; 8] = b"USPKNN\0\0";
const CACHE_VERSION: u32 = 1;

#[inline]
pub(crate) fn by_distance_then_index(a: &(f64, u32), b: &(f64, u32)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` smallest `(squared distance, index)` pairs in ascending order.
pub(crate) fn smallest_k(mut cands: Vec<(f64, u32)>, k: usize) -> Vec<(f64, u32)> {
    if k == 0 {
        return Vec::new();
    }
    if cands.len() > k {
        cands.select_nth_unstable_by(k - 1, by_distance_then_index);
        cands.truncate(k);
    }
    cands.sort_unstable_by(by_distance_then_index);
    cands
}

/// Row `i` lists the `k'` nearest neighbors of point `i` (excluding itself),
/// nearest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnnMatrix {
    neighbors: Vec<u32>,
    n: usize,
    k_prime: usize,
    source_checksum: u64,
}

impl KnnMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_prime(&self) -> usize {
        self.k_prime
    }

    pub fn source_checksum(&self) -> u64 {
        self.source_checksum
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.neighbors[i * self.k_prime..(i + 1) * self.k_prime]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.neighbors
    }

    pub(crate) fn from_parts(neighbors: Vec<u32>, n: usize, k_prime: usize, source_checksum: u64) -> Result<Self> {
        if neighbors.len() != n * k_prime {
            return Err(param_err("neighbor array does not match n x k'"));
        }
        for i in 0..n {
            let row = &neighbors[i * k_prime..(i + 1) * k_prime];
            for (pos, &j) in row.iter().enumerate() {
                if j as usize >= n || j as usize == i || row[..pos].contains(&j) {
                    return Err(Error::Input(format!("row {i} has invalid neighbor {j}")));
                }
            }
        }
        Ok(Self { neighbors, n, k_prime, source_checksum })
    }
}

/// Brute-force exact k'-NN over all pairs. Rows are computed independently
/// (in parallel when enabled) and the result is deterministic.
pub fn build_knn_matrix(ds: &Dataset, k_prime: usize, _dist: DistanceFn) -> Result<KnnMatrix> {
    let n = ds.n();
    if k_prime == 0 || k_prime >= n {
        return Err(param_err(format!("k' must satisfy 1 <= k' < n, got k'={k_prime}, n={n}")));
    }
    let rows = map_indexed(n, |i| {
        let p = ds.point(i);
        let cands: Vec<(f64, u32)> =
            (0..n).filter(|&j| j != i).map(|j| (squared_euclidean(p, ds.point(j)), j as u32)).collect();
        smallest_k(cands, k_prime)
    });
    let neighbors = rows.into_iter().flatten().map(|(_, j)| j).collect();
    Ok(KnnMatrix { neighbors, n, k_prime, source_checksum: ds.checksum() })
}

/// Exact k-NN of each query within a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    neighbors: Vec<u32>,
    distances: Vec<f64>,
    queries: usize,
    k: usize,
    train_checksum: u64,
    distance: DistanceFn,
}

impl GroundTruth {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_queries(&self) -> usize {
        self.queries
    }

    pub fn row(&self, q: usize) -> &[u32] {
        &self.neighbors[q * self.k..(q + 1) * self.k]
    }

    pub fn distances(&self, q: usize) -> &[f64] {
        &self.distances[q * self.k..(q + 1) * self.k]
    }

    pub fn train_checksum(&self) -> u64 {
        self.train_checksum
    }

    pub fn distance(&self) -> DistanceFn {
        self.distance
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.neighbors
    }
}

pub fn ground_truth(train: &Dataset, queries: &Dataset, k: usize, dist: DistanceFn) -> Result<GroundTruth> {
    if k == 0 || k > train.n() {
        return Err(param_err(format!("k must satisfy 1 <= k <= n, got k={k}, n={}", train.n())));
    }
    if train.d() != queries.d() {
        return Err(param_err(format!("dimension mismatch: train d={}, queries d={}", train.d(), queries.d())));
    }
    let rows = map_indexed(queries.n(), |qi| {
        let q = queries.point(qi);
        let cands: Vec<(f64, u32)> = (0..train.n()).map(|j| (squared_euclidean(q, train.point(j)), j as u32)).collect();
        smallest_k(cands, k)
    });
    let mut neighbors = Vec::with_capacity(queries.n() * k);
    let mut distances = Vec::with_capacity(queries.n() * k);
    for (sq, j) in rows.into_iter().flatten() {
        neighbors.push(j);
        distances.push(dist.from_squared(sq));
    }
    Ok(GroundTruth { neighbors, distances, queries: queries.n(), k, train_checksum: train.checksum(), distance: dist })
}

/// Cache layout: magic, u32 version, u64 n, u64 k', u64 dataset checksum,
/// then `n * k'` little-endian i32 neighbor ids.
pub fn save_cache(m: &KnnMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut w = Writer::default();
    w.bytes(CACHE_MAGIC);
    w.u32(CACHE_VERSION);
    w.u64(m.n as u64);
    w.u64(m.k_prime as u64);
    w.u64(m.source_checksum);
    for &j in &m.neighbors {
        w.i32(j as i32);
    }
    fs::write(path, w.buf)?;
    Ok(())
}

/// Loads a cache and checks it was built from `ds`.
pub fn load_cache(path: impl AsRef<Path>, ds: &Dataset) -> Result<KnnMatrix> {
    let m = decode_cache(&fs::read(path)?)?;
    let expected = ds.checksum();
    if m.source_checksum != expected || m.n != ds.n() {
        return Err(Error::StaleCache { expected, found: m.source_checksum });
    }
    Ok(m)
}

fn decode_cache(bytes: &[u8]) -> Result<KnnMatrix> {
    let mut r = Reader::new(bytes);
    r.expect_magic(CACHE_MAGIC)?;
    let version = r.u32()?;
    if version != CACHE_VERSION {
        return Err(r.error(format!("unsupported cache version {version}")));
    }
    let n = r.u64()? as usize;
    let k_prime = r.u64()? as usize;
    let checksum = r.u64()?;
    let count = n.checked_mul(k_prime).filter(|c| c.checked_mul(4) == Some(r.remaining()));
    let Some(count) = count else {
        return Err(r.error(format!("payload of {} bytes does not hold {n} x {k_prime} ids", r.remaining())));
    };
    let mut neighbors = Vec::with_capacity(count);
    for _ in 0..count {
        let at = r.offset();
        let j = r.i32()?;
        if j < 0 || j as usize >= n {
            return Err(Error::Format { offset: at, message: format!("neighbor id {j} out of range") });
        }
        neighbors.push(j as u32);
    }
    KnnMatrix::from_parts(neighbors, n, k_prime, checksum)
        .map_err(|e| Error::Format { offset: 36, message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> Dataset {
        Dataset::new(xs.to_vec(), 1).unwrap()
    }

    #[test]
    fn hand_computed_matrix() {
        let m = build_knn_matrix(&line(&[0.0, 1.0, 3.0, 7.0]), 2, DistanceFn::Euclidean).unwrap();
        assert_eq!(m.as_slice(), &[1, 2, 0, 2, 1, 0, 2, 1]);
    }

    #[test]
    fn full_rows_are_permutations() {
        let ds = line(&[4.0, -1.0, 2.5, 9.0, 0.0]);
        let m = build_knn_matrix(&ds, 4, DistanceFn::Euclidean).unwrap();
        for i in 0..5 {
            let mut row = m.row(i).to_vec();
            row.sort_unstable();
            let expect: Vec<u32> = (0..5).filter(|&j| j != i as u32).collect();
            assert_eq!(row, expect);
        }
        assert!(build_knn_matrix(&ds, 5, DistanceFn::Euclidean).is_err());
        assert!(build_knn_matrix(&ds, 0, DistanceFn::Euclidean).is_err());
    }

    #[test]
    fn duplicate_points_tie_by_index() {
        let ds = line(&[2.0, 2.0, 5.0]);
        let m = build_knn_matrix(&ds, 2, DistanceFn::Euclidean).unwrap();
        assert_eq!(m.row(0), &[1, 2]);
        assert_eq!(m.row(1), &[0, 2]);
    }

    #[test]
    fn ground_truth_cases() {
        let train = line(&[0.0, 10.0]);
        let gt = ground_truth(&train, &line(&[1.0]), 1, DistanceFn::Euclidean).unwrap();
        assert_eq!(gt.row(0), &[0]);
        assert_eq!(gt.distances(0), &[1.0]);

        let gt = ground_truth(&train, &line(&[10.0]), 2, DistanceFn::Euclidean).unwrap();
        assert_eq!(gt.row(0), &[1, 0]);
        assert_eq!(gt.distances(0)[0], 0.0);

        let wide = Dataset::new(vec![0.0, 0.0], 2).unwrap();
        assert!(ground_truth(&train, &wide, 1, DistanceFn::Euclidean).is_err());
        assert!(ground_truth(&train, &line(&[1.0]), 3, DistanceFn::Euclidean).is_err());
    }

    #[test]
    fn cache_round_trip_and_staleness() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("knn.cache");
        let ds = crate::data::generate_moons(40, 0.1, 1).unwrap();
        let m = build_knn_matrix(&ds, 5, DistanceFn::Euclidean).unwrap();
        save_cache(&m, &path).unwrap();
        assert_eq!(load_cache(&path, &ds).unwrap(), m);

        let other = crate::data::generate_moons(40, 0.1, 2).unwrap();
        assert!(matches!(load_cache(&path, &other), Err(Error::StaleCache { .. })));

        let bytes = fs::read(&path).unwrap();
        for cut in [0, 7, 20, bytes.len() - 1] {
            fs::write(&path, &bytes[..cut]).unwrap();
            assert!(matches!(load_cache(&path, &ds), Err(Error::Format { .. })), "cut {cut}");
        }
    }
}
