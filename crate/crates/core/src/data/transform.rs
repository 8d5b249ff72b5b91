use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::param_err;
use crate::{Error, Result};

/// Seeded uniform split of `0..n` into (train, query) index sets, each sorted
/// ascending. The query side has `round(n * query_fraction)` elements.
pub fn split_indices(n: usize, query_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(query_fraction > 0.0 && query_fraction < 1.0) {
        return Err(param_err(format!("query fraction must lie in (0, 1), got {query_fraction}")));
    }
    let n_query = (n as f64 * query_fraction).round() as usize;
    if n_query == 0 || n_query >= n {
        return Err(param_err(format!("query fraction {query_fraction} of {n} points leaves one side empty")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut queries = perm[..n_query].to_vec();
    let mut train = perm[n_query..].to_vec();
    queries.sort_unstable();
    train.sort_unstable();
    Ok((train, queries))
}

pub fn split(ds: &Dataset, query_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train, queries) = split_indices(ds.n(), query_fraction, seed)?;
    Ok((ds.subset(&train)?, ds.subset(&queries)?))
}

/// Per-dimension affine map fitted on training data and reused verbatim for
/// queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; 1.0 for constant dimensions so they are
    /// only centered.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        if ds.n() < 2 {
            return Err(param_err("standardization needs at least 2 points"));
        }
        let (n, d) = (ds.n() as f64, ds.d());
        let mut mean = vec![0.0; d];
        for row in ds.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in ds.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply_point(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.d() != self.mean.len() {
            return Err(Error::Parameter(format!(
                "standardizer fitted on d={}, dataset has d={}",
                self.mean.len(),
                ds.d()
            )));
        }
        let points = ds.rows().flat_map(|r| self.apply_point(r)).collect();
        let out = Dataset::new(points, ds.d())?;
        match ds.labels() {
            Some(l) => out.with_labels(l.to_vec()),
            None => Ok(out),
        }
    }
}

pub fn standardize(train: &Dataset) -> Result<(Dataset, Standardizer)> {
    let t = Standardizer::fit(train)?;
    Ok((t.apply(train)?, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_disjoint_exhaustive_and_seeded() {
        let (train, queries) = split_indices(10, 0.2, 4).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(queries.len(), 2);
        let mut all: Vec<usize> = train.iter().chain(&queries).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split_indices(10, 0.2, 4).unwrap(), (train, queries));
        assert!(split_indices(10, 0.01, 4).is_err());
        assert!(split_indices(10, 0.99, 4).is_err());
        assert!(split_indices(10, 0.0, 4).is_err());
    }

    #[test]
    fn split_datasets_carry_labels() {
        let ds = Dataset::new((0..20).map(f64::from).collect(), 2).unwrap().with_labels((0..10).collect()).unwrap();
        let (train, q) = split(&ds, 0.3, 1).unwrap();
        assert_eq!(train.n() + q.n(), 10);
        for (row, &label) in q.rows().zip(q.labels().unwrap()) {
            assert_eq!(row[0], 2.0 * label as f64);
        }
    }

    #[test]
    fn standardize_two_points() {
        let ds = Dataset::new(vec![0.0, 2.0], 1).unwrap();
        let (out, t) = standardize(&ds).unwrap();
        assert_eq!(out.points(), &[-1.0, 1.0]);
        assert_eq!(t.mean, vec![1.0]);
        assert_eq!(t.scale, vec![1.0]);
    }

    #[test]
    fn standardize_is_idempotent() {
        let ds = Dataset::new(vec![0.3, 5.0, 1.7, -2.0, 9.1, 0.5, -4.2, 3.3], 2).unwrap();
        let (once, _) = standardize(&ds).unwrap();
        let (twice, _) = standardize(&once).unwrap();
        for (a, b) in once.points().iter().zip(twice.points()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_dimension_is_only_centered() {
        let ds = Dataset::new(vec![3.0, 1.0, 3.0, 5.0], 2).unwrap();
        let (out, t) = standardize(&ds).unwrap();
        assert_eq!(t.scale[0], 1.0);
        assert_eq!(out.point(0)[0], 0.0);
        assert_eq!(out.point(1)[1], 1.0);
        assert!(standardize(&Dataset::new(vec![1.0], 1).unwrap()).is_err());
    }
}
