use std::io::Write;

use serde::Serialize;

use super::metrics::recall_at_k;
use crate::data::Dataset;
use crate::error::param_err;
use crate::index::AnnIndex;
use crate::knn::GroundTruth;
use crate::parallel::map_indexed;
use crate::Result;

/// One point on a recall / candidate-count curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub m_prime: usize,
    pub mean_candidate_count: f64,
    pub recall_at_k: f64,
}

/// Probe depths for a sweep: every depth up to 32 bins, then a doubling grid
/// that always ends at `m`.
pub fn default_m_prime_grid(m: usize) -> Vec<usize> {
    if m <= 32 {
        return (1..=m).collect();
    }
    let mut grid: Vec<usize> = (1..=8).collect();
    let mut v = 8usize;
    while v * 2 < m {
        v *= 2;
        grid.push(v);
        if v + v / 2 < m {
            grid.push(v + v / 2);
        }
    }
    grid.push(m);
    grid.dedup();
    grid
}

/// Mean recall and candidate count per probe depth, over all queries.
pub fn sweep_curve(
    index: &dyn AnnIndex,
    queries: &Dataset,
    gt: &GroundTruth,
    k: usize,
    m_primes: &[usize],
) -> Result<Vec<CurvePoint>> {
    let ds = index.dataset();
    if gt.train_checksum() != ds.checksum() || gt.distance() != index.distance() {
        return Err(param_err("ground truth was computed for a different dataset or distance"));
    }
    if gt.k() != k || gt.num_queries() != queries.n() {
        return Err(param_err(format!(
            "ground truth has k={} over {} queries, sweep asked k={k} over {}",
            gt.k(),
            gt.num_queries(),
            queries.n()
        )));
    }
    if queries.n() == 0 {
        return Err(param_err("sweep needs at least one query"));
    }
    let mut curve = Vec::with_capacity(m_primes.len());
    for &mp in m_primes {
        let per_query = map_indexed(queries.n(), |q| {
            index.query(queries.point(q), k, mp).map(|r| (recall_at_k(&r.ids, gt.row(q)), r.candidate_count))
        });
        let (mut recall, mut cands) = (0.0, 0.0);
        for r in per_query {
            let (rec, c) = r?;
            recall += rec;
            cands += c as f64;
        }
        let nq = queries.n() as f64;
        curve.push(CurvePoint { m_prime: mp, mean_candidate_count: cands / nq, recall_at_k: recall / nq });
    }
    Ok(curve)
}

/// A curve point tagged with the run that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub method: String,
    pub m: usize,
    pub m_prime: usize,
    pub mean_candidates: f64,
    pub recall: f64,
    pub k: usize,
    pub seed: u64,
}

impl CurveRow {
    pub fn from_curve(method: &str, m: usize, k: usize, seed: u64, curve: &[CurvePoint]) -> Vec<CurveRow> {
        curve
            .iter()
            .map(|p| CurveRow {
                method: method.to_string(),
                m,
                m_prime: p.m_prime,
                mean_candidates: p.mean_candidate_count,
                recall: p.recall_at_k,
                k,
                seed,
            })
            .collect()
    }
}

/// Writes rows as CSV with columns `method,m,m_prime,mean_candidates,recall,k,seed`.
pub fn write_curve_csv<W: Write>(out: W, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["method", "m", "m_prime", "mean_candidates", "recall", "k", "seed"])?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::bench::KMeansIndex;
    use crate::data::{generate_blobs, DistanceFn};
    use crate::knn::ground_truth;

    #[test]
    fn grid_shapes() {
        assert_eq!(default_m_prime_grid(4), vec![1, 2, 3, 4]);
        let g = default_m_prime_grid(256);
        assert_eq!(*g.last().unwrap(), 256);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(&g[..8], &[1, 2, 3, 4, 5, 6, 7, 8]);
    }

    #[test]
    fn single_query_single_bin() {
        // Four far-apart blobs: a query at a training point finds all ten
        // neighbors inside its own bin.
        let ds = Arc::new(generate_blobs(80, 2, 4, 50.0, 0.5, 3).unwrap());
        let idx = KMeansIndex::build(ds.clone(), 4, 50, 1, DistanceFn::Euclidean).unwrap();
        let q = ds.subset(&[0]).unwrap();
        let gt = ground_truth(&ds, &q, 10, DistanceFn::Euclidean).unwrap();
        let curve = sweep_curve(&idx, &q, &gt, 10, &[1, 4]).unwrap();
        let bin = idx.kmeans.partition.assignment()[0] as usize;
        assert_eq!(
            curve[0],
            CurvePoint {
                m_prime: 1,
                mean_candidate_count: idx.kmeans.partition.bin(bin).len() as f64,
                recall_at_k: 1.0
            }
        );
        assert_eq!(curve[1].recall_at_k, 1.0);
        assert_eq!(curve[1].mean_candidate_count, 80.0);
    }

    #[test]
    fn mismatched_truth_is_rejected() {
        let ds = Arc::new(generate_blobs(60, 2, 3, 5.0, 1.0, 3).unwrap());
        let other = generate_blobs(60, 2, 3, 5.0, 1.0, 4).unwrap();
        let idx = KMeansIndex::build(ds.clone(), 3, 20, 1, DistanceFn::Euclidean).unwrap();
        let q = ds.subset(&[0, 1]).unwrap();
        let gt = ground_truth(&other, &q, 5, DistanceFn::Euclidean).unwrap();
        assert!(sweep_curve(&idx, &q, &gt, 5, &[1]).is_err());
        let gt = ground_truth(&ds, &q, 5, DistanceFn::Euclidean).unwrap();
        assert!(sweep_curve(&idx, &q, &gt, 4, &[1]).is_err());
        assert!(sweep_curve(&idx, &q, &gt, 5, &[1]).is_ok());
    }

    #[test]
    fn csv_schema() {
        let curve = [CurvePoint { m_prime: 2, mean_candidate_count: 12.5, recall_at_k: 0.75 }];
        let rows = CurveRow::from_curve("kmeans", 4, 10, 7, &curve);
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "method,m,m_prime,mean_candidates,recall,k,seed\nkmeans,4,2,12.5,0.75,10,7\n"
        );
    }
}
