//! Learned, balanced space partitions for approximate nearest neighbor search.
//!
//! The offline phase builds an exact k'-NN matrix over the dataset and trains a
//! small model (logistic regression or a one-hidden-layer MLP) whose softmax
//! output assigns every point of the space to one of `m` bins. Training is
//! unsupervised: a cross-entropy term pulls each point towards the bins of its
//! neighbors while a top-window term pushes the bins towards equal sizes.
//!
//! The online phase ranks bins by model probability, gathers the points of the
//! `m'` most probable bins from a lookup table and scans them linearly.
//!
//! ```no_run
//! use std::sync::Arc;
//! use uspann::prelude::*;
//!
//! let ds = Arc::new(generate_moons(2000, 0.05, 7).unwrap());
//! let cfg = TrainConfig::default();
//! let knn = build_knn_matrix(&ds, cfg.k_prime, DistanceFn::Euclidean).unwrap();
//! let arch = Architecture::mlp(ds.d(), 16);
//! let (model, _report) = train(&ds, &knn, &arch, &cfg).unwrap();
//! let index = FlatIndex::build(model, ds.clone(), DistanceFn::Euclidean).unwrap();
//! let hits = index.query(&[0.5, 0.25], 10, 2).unwrap();
//! println!("{:?} from {} candidates", hits.ids, hits.candidate_count);
//! ```

pub mod bench;
mod binio;
pub mod data;
mod error;
pub mod index;
pub mod knn;
pub mod loss;
pub mod model;
mod parallel;
pub mod trainer;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::bench::{
        bin_balance, cluster_purity, default_m_prime_grid, kmeans_partition, recall_at_k, sweep_curve, CurvePoint,
        KMeansIndex, KMeansPartition,
    };
    pub use crate::data::{
        generate_blobs, generate_circles, generate_moons, split, standardize, Dataset, DistanceFn, Standardizer,
    };
    pub use crate::index::{
        build_hierarchical, build_partition, load_index, save_index, train_ensemble, AnnIndex, EnsembleIndex,
        EnsembleQueryMode, FlatIndex, HierarchicalIndex, LoadedIndex, Partition, QueryResult,
    };
    pub use crate::knn::{build_knn_matrix, ground_truth, GroundTruth, KnnMatrix};
    pub use crate::model::{ArchKind, Architecture, BinProbabilities, PartitionerModel};
    pub use crate::trainer::{train, TrainConfig, TrainReport};
    pub use crate::{Error, Result};
}
