use serde_json::Value;
use uspann_demo::Playground;

fn trained(m: usize) -> (Playground, Vec<u32>) {
    let mut pg = Playground::new("moons", 500, 0.05, 3).unwrap();
    let bins = pg.train(m, 10, 7.0, 1).unwrap();
    (pg, bins)
}

fn ids(v: &Value, key: &str) -> Vec<u32> {
    v[key].as_array().unwrap().iter().map(|x| x.as_u64().unwrap() as u32).collect()
}

#[test]
fn dataset_is_split_and_standardized() {
    let pg = Playground::new("circles", 250, 0.05, 0).unwrap();
    assert_eq!(pg.len(), 200);
    let pts = pg.points();
    assert_eq!(pts.len(), 400);
    for axis in 0..2 {
        let mean = pts.iter().skip(axis).step_by(2).sum::<f64>() / 200.0;
        assert!(mean.abs() < 1e-9);
    }
    assert_eq!(pg.labels().len(), 200);
    assert!(Playground::new("spirals", 100, 0.1, 0).is_err());
}

#[test]
fn assignment_matches_the_bin_map_at_each_point() {
    let (pg, bins) = trained(8);
    assert_eq!(bins.len(), pg.len());
    let hist = pg.histogram("usp").unwrap();
    assert_eq!(hist.iter().sum::<u32>() as usize, pg.len());
    for (b, &size) in hist.iter().enumerate() {
        assert_eq!(size as usize, bins.iter().filter(|&&x| x as usize == b).count());
    }
    // A 1x1 grid over a degenerate box samples exactly that point.
    let pts = pg.points();
    for i in (0..pg.len()).step_by(37) {
        let (x, y) = (pts[2 * i], pts[2 * i + 1]);
        assert_eq!(pg.bin_map("usp", 1, 1, x, x, y, y).unwrap(), vec![bins[i]]);
    }
    let grid = pg.bin_map("kmeans", 5, 3, -2.0, 2.0, -2.0, 2.0).unwrap();
    assert_eq!(grid.len(), 15);
    assert!(grid.iter().all(|&b| b < 8));
}

#[test]
fn probe_finds_the_point_itself_and_everything_at_full_probe() {
    let (pg, bins) = trained(8);
    let pts = pg.points();
    let v: Value = serde_json::from_str(&pg.probe("usp", pts[0], pts[1], 5, 1).unwrap()).unwrap();
    let candidates = ids(&v, "candidates");
    assert!(candidates.iter().all(|&c| bins[c as usize] == bins[0]));
    assert_eq!(ids(&v, "found")[0], 0);
    assert_eq!(ids(&v, "exact")[0], 0);

    let full: Value = serde_json::from_str(&pg.probe("kmeans", 0.3, -0.2, 5, 8).unwrap()).unwrap();
    assert_eq!(ids(&full, "candidates").len(), pg.len());
    assert_eq!(ids(&full, "found"), ids(&full, "exact"));
    assert!(pg.probe("usp", 0.0, 0.0, 5, 9).is_err());
    assert!(pg.probe("lsh", 0.0, 0.0, 5, 1).is_err());
}

#[test]
fn curves_end_at_full_recall() {
    let (pg, _) = trained(6);
    let v: Value = serde_json::from_str(&pg.curves(5).unwrap()).unwrap();
    for method in ["usp", "kmeans"] {
        let pts = v[method].as_array().unwrap();
        assert_eq!(pts.len(), 6);
        let recall: Vec<f64> = pts.iter().map(|p| p["recall_at_k"].as_f64().unwrap()).collect();
        assert!(recall.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*recall.last().unwrap(), 1.0);
        assert_eq!(pts.last().unwrap()["mean_candidate_count"].as_f64().unwrap(), pg.len() as f64);
    }
}

#[test]
fn queries_need_a_trained_partition() {
    let mut pg = Playground::new("blobs", 200, 0.1, 2).unwrap();
    assert!(pg.histogram("usp").is_err());
    assert!(pg.curves(5).is_err());
    assert!(pg.train(1, 1, 7.0, 0).is_err());
}
