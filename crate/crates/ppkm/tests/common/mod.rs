//! Dataset builders shared by the integration suites.
#![allow(dead_code)] // each test binary uses its own subset

use ppkm::dataset::{Dataset, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Points uniform in `[0, 10)^d` — general position with probability one.
pub fn random_dataset(seed: u64, n: usize, d: usize) -> Dataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|id| Point::new(id as u64, (0..d).map(|_| rng.gen_range(0.0..10.0)).collect()))
        .collect();
    Dataset::new(points).expect("generated dataset is valid")
}

/// Well-separated blobs: `blobs` cluster cores at least 20 apart per
/// dimension, unit jitter around each, ids dealt round-robin across blobs.
pub fn blob_dataset(seed: u64, n: usize, d: usize, blobs: usize) -> Dataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let cores: Vec<Vec<f64>> = (0..blobs)
        .map(|b| (0..d).map(|_| 20.0 * b as f64 + rng.gen_range(2.0..6.0)).collect())
        .collect();
    let points = (0..n)
        .map(|id| {
            let core = &cores[id % blobs];
            let coords = core.iter().map(|c| c + rng.gen_range(-1.0..1.0)).collect();
            Point::new(id as u64, coords)
        })
        .collect();
    Dataset::new(points).expect("generated dataset is valid")
}

/// Relative comparison that also accepts exactly equal infinities.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}
