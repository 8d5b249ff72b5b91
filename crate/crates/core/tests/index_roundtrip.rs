mod common;

use std::sync::Arc;

use common::{fixture, kinds};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uspann::index::read_index;
use uspann::prelude::*;

#[test]
fn every_kind_round_trips_bit_exactly() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    for index in kinds(f) {
        let path = dir.path().join(index.kind_name());
        save_index(&path, &index).unwrap();
        let loaded = load_index(&path, f.train.clone()).unwrap();
        assert_eq!(loaded.kind_name(), index.kind_name());
        assert_eq!(loaded.to_bytes(), index.to_bytes());

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let q = f.queries.point(rng.gen_range(0..f.queries.n()));
            let mp = rng.gen_range(1..=index.num_bins());
            assert_eq!(loaded.query(q, 7, mp).unwrap(), index.query(q, 7, mp).unwrap());
        }
    }
}

#[test]
fn loaded_parts_match_the_originals() {
    let f = fixture();
    let bytes = LoadedIndex::from(f.ensemble.clone()).to_bytes();
    let LoadedIndex::Ensemble(ens) = read_index(&bytes, f.train.clone()).unwrap() else {
        panic!("kind tag not honoured");
    };
    for q in f.queries.rows().take(20) {
        assert_eq!(ens.confidences(q).unwrap(), f.ensemble.confidences(q).unwrap());
    }
    for (a, b) in ens.members().iter().zip(f.ensemble.members()) {
        assert_eq!(a.model(), b.model());
        assert_eq!(a.partition(), b.partition());
    }
    assert_eq!(ens.weight_history(), f.ensemble.weight_history());

    let bytes = LoadedIndex::from(f.hier.clone()).to_bytes();
    let LoadedIndex::Hierarchical(h) = read_index(&bytes, f.train.clone()).unwrap() else {
        panic!("kind tag not honoured");
    };
    assert_eq!(h.nodes(), f.hier.nodes());
    assert_eq!(h.partition(), f.hier.partition());
    assert_eq!(h.replay_assignment().unwrap(), h.partition().assignment());
}

#[test]
fn truncated_files_are_rejected() {
    let f = fixture();
    for index in kinds(f) {
        let bytes = index.to_bytes();
        let step = (bytes.len() / 97).max(1);
        for len in (0..bytes.len()).step_by(step).chain([bytes.len() - 1]) {
            let err = read_index(&bytes[..len], f.train.clone()).unwrap_err();
            assert!(matches!(err, Error::Format { .. }), "{} cut at {len}: {err}", index.kind_name());
        }
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(read_index(&longer, f.train.clone()), Err(Error::Format { .. })));
    }
}

#[test]
fn version_kind_and_magic_are_checked() {
    let f = fixture();
    let bytes = LoadedIndex::from(f.flat.clone()).to_bytes();
    let mut bad_magic = bytes.clone();
    bad_magic[0] ^= 0xff;
    let mut bad_version = bytes.clone();
    bad_version[8] = 99;
    let mut bad_kind = bytes.clone();
    bad_kind[12] = 7;
    for (what, b) in [("magic", bad_magic), ("version", bad_version), ("kind", bad_kind)] {
        assert!(matches!(read_index(&b, f.train.clone()), Err(Error::Format { .. })), "{what}");
    }
}

#[test]
fn a_different_dataset_is_stale() {
    let f = fixture();
    let bytes = LoadedIndex::from(f.flat.clone()).to_bytes();
    let mut points = f.train.points().to_vec();
    points[5] += 1.0;
    let other = Arc::new(Dataset::new(points, f.train.d()).unwrap());
    assert!(matches!(read_index(&bytes, other), Err(Error::StaleCache { .. })));
}

#[test]
fn missing_file_is_an_io_error() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_index(dir.path().join("nope"), f.train.clone()), Err(Error::Io(_))));
}
