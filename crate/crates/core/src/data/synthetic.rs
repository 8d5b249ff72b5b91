//! Seeded synthetic datasets. Values are rounded to f32 precision so that a
//! generated dataset survives a trip through the on-disk formats unchanged.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{squared_euclidean, Dataset};
use crate::error::param_err;
use crate::Result;

fn f32_grid(v: f64) -> f64 {
    v as f32 as f64
}

fn noise(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    if scale == 0.0 {
        0.0
    } else {
        scale * rng.sample::<f64, _>(StandardNormal)
    }
}

fn place_centers(c: usize, d: usize, separation: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sep_sq = separation * separation;
    let mut side = separation * 2.0 * (c as f64).powf(1.0 / d as f64).max(1.0);
    loop {
        let mut centers: Vec<f64> = Vec::with_capacity(c * d);
        let mut attempts = 0usize;
        while centers.len() < c * d && attempts < 10_000 * c {
            attempts += 1;
            let cand: Vec<f64> = (0..d).map(|_| rng.gen_range(-side..=side)).collect();
            if centers.chunks_exact(d).all(|other| squared_euclidean(other, &cand) >= sep_sq) {
                centers.extend(cand);
            }
        }
        if centers.len() == c * d {
            return centers;
        }
        side *= 1.5;
    }
}

/// Isotropic Gaussian blobs around `c` seeded centers that are pairwise at
/// least `separation` apart. Points are generated cluster by cluster, the
/// first `n % c` clusters receiving one extra point.
pub fn generate_blobs(n: usize, d: usize, c: usize, separation: f64, sigma: f64, seed: u64) -> Result<Dataset> {
    if c == 0 || n < c {
        return Err(param_err(format!("need n >= c >= 1, got n={n}, c={c}")));
    }
    if d == 0 {
        return Err(param_err("dimensionality must be at least 1"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) || !(separation >= 0.0 && separation.is_finite()) {
        return Err(param_err("sigma and separation must be finite and non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = place_centers(c, d, separation, &mut rng);
    let mut points = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for cluster in 0..c {
        let size = n / c + usize::from(cluster < n % c);
        let center = &centers[cluster * d..(cluster + 1) * d];
        for _ in 0..size {
            points.extend(center.iter().map(|&x| f32_grid(x + noise(&mut rng, sigma))));
            labels.push(cluster as u32);
        }
    }
    Dataset::new(points, d)?.with_labels(labels)
}

/// Two interleaving half circles: `n / 2` points on the upper unit arc, the
/// rest on the lower arc shifted to (1, 0.5). Angles are evenly spaced over
/// [0, pi] with both endpoints included.
pub fn generate_moons(n: usize, noise_scale: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(param_err("moons need at least 2 points"));
    }
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(param_err("noise must be finite and non-negative"));
    }
    let n_outer = n / 2;
    let n_inner = n - n_outer;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for (arc, count) in [(0u32, n_outer), (1u32, n_inner)] {
        for i in 0..count {
            let t = linspace(0.0, PI, count, i, true);
            let (x, y) = if arc == 0 { (t.cos(), t.sin()) } else { (1.0 - t.cos(), 0.5 - t.sin()) };
            points.push(f32_grid(x + noise(&mut rng, noise_scale)));
            points.push(f32_grid(y + noise(&mut rng, noise_scale)));
            labels.push(arc);
        }
    }
    Dataset::new(points, 2)?.with_labels(labels)
}

/// Two concentric circles: `n / 2` points on the unit circle, the rest on a
/// circle of radius `factor`. Angles are evenly spaced over [0, 2 pi).
pub fn generate_circles(n: usize, factor: f64, noise_scale: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(param_err("circles need at least 2 points"));
    }
    if !(factor > 0.0 && factor < 1.0) {
        return Err(param_err(format!("factor must lie in (0, 1), got {factor}")));
    }
    if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
        return Err(param_err("noise must be finite and non-negative"));
    }
    let n_outer = n / 2;
    let n_inner = n - n_outer;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for (ring, count, radius) in [(0u32, n_outer, 1.0), (1u32, n_inner, factor)] {
        for i in 0..count {
            let t = linspace(0.0, 2.0 * PI, count, i, false);
            points.push(f32_grid(radius * t.cos() + noise(&mut rng, noise_scale)));
            points.push(f32_grid(radius * t.sin() + noise(&mut rng, noise_scale)));
            labels.push(ring);
        }
    }
    Dataset::new(points, 2)?.with_labels(labels)
}

fn linspace(start: f64, stop: f64, count: usize, i: usize, endpoint: bool) -> f64 {
    let div = if endpoint { count.saturating_sub(1) } else { count };
    if div == 0 {
        start
    } else {
        start + (stop - start) * i as f64 / div as f64
    }
}
