//! Baselines, evaluation metrics and benchmark orchestration.

mod compare;
mod kmeans;
mod metrics;
mod sweep;

pub use compare::{build_learned, compare, CompareConfig, Method};
pub use kmeans::{inertia, kmeans_partition, KMeansIndex, KMeansPartition};
pub use metrics::{bin_balance, cluster_purity, recall_at_k};
pub use sweep::{default_m_prime_grid, sweep_curve, write_curve_csv, CurvePoint, CurveRow};
