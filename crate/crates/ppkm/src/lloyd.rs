//! Lloyd-iteration primitives shared by the plaintext reference and the
//! protocol servers.
//!
//! Cluster assignment and convergence detection live here, in exactly one
//! place, so the protocol (which runs on perturbed coordinates) and the
//! oracle (which runs on the originals) cannot drift apart on tie-breaking
//! or tolerance semantics: both call these functions.

use serde::{Deserialize, Serialize};

/// Instrumentation totals for one party (or the oracle).
///
/// "Additions" counts subtractions too; an inversion is one reciprocal or
/// division. A distance evaluation is one point-to-center squared distance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    pub multiplications: u64,
    pub additions: u64,
    pub inversions: u64,
    pub comparisons: u64,
    pub distance_evals: u64,
}

impl OpCounters {
    pub fn merge(&mut self, other: &OpCounters) {
        self.multiplications += other.multiplications;
        self.additions += other.additions;
        self.inversions += other.inversions;
        self.comparisons += other.comparisons;
        self.distance_evals += other.distance_evals;
    }
}

/// Squared Euclidean distance. Callers guarantee equal dimensions.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Index of the nearest center; ties go to the lowest index (strict `<`
/// against the incumbent, scanning upwards). Comparing squared distances
/// gives the same order and the same ties as comparing distances.
pub fn nearest_center(coords: &[f64], centers: &[Vec<f64>], ops: &mut OpCounters) -> usize {
    debug_assert!(!centers.is_empty());
    let d = coords.len() as u64;
    let mut best = 0;
    let mut best_d2 = squared_distance(coords, &centers[0]);
    for (j, c) in centers.iter().enumerate().skip(1) {
        let d2 = squared_distance(coords, c);
        if d2 < best_d2 {
            best = j;
            best_d2 = d2;
        }
    }
    let k = centers.len() as u64;
    ops.distance_evals += k;
    ops.multiplications += k * d;
    ops.additions += k * (2 * d).saturating_sub(1);
    ops.comparisons += k.saturating_sub(1);
    best
}

/// One assignment sweep: labels every point against `centers` and returns
/// per-cluster coordinate sums and member counts.
pub fn assign_and_accumulate(
    points: &[(u64, Vec<f64>)],
    centers: &[Vec<f64>],
    ops: &mut OpCounters,
) -> (Vec<(u64, usize)>, Vec<Vec<f64>>, Vec<u64>) {
    let k = centers.len();
    let dim = centers[0].len();
    let mut labels = Vec::with_capacity(points.len());
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0u64; k];
    for (id, coords) in points {
        let j = nearest_center(coords, centers, ops);
        labels.push((*id, j));
        for (s, c) in sums[j].iter_mut().zip(coords) {
            *s += c;
        }
        ops.additions += dim as u64;
        counts[j] += 1;
    }
    (labels, sums, counts)
}

/// Turns per-cluster sums and counts into centers: each non-empty cluster
/// becomes `sum * (1/count)` (one reciprocal per cluster, then one multiply
/// per coordinate); an empty cluster carries the previous center forward.
/// Returns the new centers plus the indices of the clusters that were empty.
pub fn finalize_centers(
    sums: &[Vec<f64>],
    counts: &[u64],
    previous: &[Vec<f64>],
    ops: &mut OpCounters,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    debug_assert_eq!(sums.len(), counts.len());
    debug_assert_eq!(sums.len(), previous.len());
    let mut centers = Vec::with_capacity(sums.len());
    let mut empties = Vec::new();
    for (j, (sum, &count)) in sums.iter().zip(counts).enumerate() {
        if count == 0 {
            empties.push(j);
            centers.push(previous[j].clone());
        } else {
            let recip = 1.0 / count as f64;
            ops.inversions += 1;
            ops.multiplications += sum.len() as u64;
            centers.push(sum.iter().map(|s| s * recip).collect());
        }
    }
    (centers, empties)
}

/// Convergence test: every center may move at most `tol * (1 + |old|)`
/// (Euclidean movement, relative to the old center's norm). With `tol = 0`
/// this degenerates to exact equality — the classic "centroids repeat" stop
/// rule. The relative form is what makes the masked protocol and the
/// plaintext reference stop on the same round: re-masking with fresh round
/// keys re-rounds the shared centroids, so their absolute positions wobble
/// by a few ulps per round even at a fixed point.
pub fn centers_converged(old: &[Vec<f64>], new: &[Vec<f64>], tol: f64) -> bool {
    debug_assert_eq!(old.len(), new.len());
    old.iter().zip(new).all(|(a, b)| {
        let movement2 = squared_distance(a, b);
        let norm2 = a.iter().map(|c| c * c).sum::<f64>();
        let allowed = tol * (1.0 + norm2.sqrt());
        movement2.sqrt() <= allowed
    })
}
