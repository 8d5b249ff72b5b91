#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use uspann::prelude::*;

pub const DIST: DistanceFn = DistanceFn::Euclidean;

/// Small trained indexes over 2-D moons, shared by the tests of one binary.
pub struct Fixture {
    pub train: Arc<Dataset>,
    pub queries: Dataset,
    pub knn: KnnMatrix,
    pub flat: FlatIndex,
    pub ensemble: EnsembleIndex,
    pub hier: HierarchicalIndex,
}

pub fn quick_config() -> TrainConfig {
    TrainConfig { epochs: 8, ..TrainConfig::default() }
}

pub fn fixture() -> &'static Fixture {
    static CELL: OnceLock<Fixture> = OnceLock::new();
    CELL.get_or_init(|| {
        let raw = generate_moons(660, 0.08, 4).unwrap();
        let (train, queries) = split(&raw, 60.0 / 660.0, 4).unwrap();
        let (train, scaler) = standardize(&train).unwrap();
        let queries = scaler.apply(&queries).unwrap();
        let train = Arc::new(train);
        let knn = build_knn_matrix(&train, 10, DIST).unwrap();
        let arch = Architecture::mlp(2, 8);
        let cfg = quick_config();
        let (model, _) = train_model(&train, &knn, &arch, &cfg);
        let flat = FlatIndex::build(model, train.clone(), DIST).unwrap();
        let (ensemble, _) = train_ensemble(train.clone(), &knn, &arch, &cfg, 3, DIST).unwrap();
        let hier = build_hierarchical(train.clone(), &arch.with_output_bins(2), &cfg, &[2, 4], DIST).unwrap();
        Fixture { train, queries, knn, flat, ensemble, hier }
    })
}

fn train_model(
    ds: &Dataset,
    knn: &KnnMatrix,
    arch: &Architecture,
    cfg: &TrainConfig,
) -> (PartitionerModel, TrainReport) {
    train(ds, knn, arch, cfg).unwrap()
}

pub fn kinds(f: &Fixture) -> Vec<LoadedIndex> {
    vec![f.flat.clone().into(), f.ensemble.clone().into(), f.hier.clone().into()]
}

/// Brute-force k-NN by full sort, ties by lower index.
pub fn brute_force(ds: &Dataset, q: &[f64], k: usize) -> Vec<u32> {
    let mut all: Vec<(f64, u32)> =
        ds.rows().enumerate().map(|(i, p)| (p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i as u32)).collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|(_, i)| i).collect()
}
