//! Reference plaintext k-means and symbolic cost models.
//!
//! The oracle runs ordinary Lloyd's method on the original data. It exists
//! to be compared against: the protocol's whole correctness story is that
//! its per-round assignments match this oracle's, round for round, so the
//! oracle deliberately shares the nearest-center tie rule, the empty-cluster
//! rule and the convergence test with the protocol (both call into
//! [`crate::lloyd`]) — equivalence tests then compare algorithms, not
//! incidental float policies.
//!
//! One iteration = one assignment pass plus one center update; `iterations`
//! counts completed passes including the final confirming one. With
//! `max_iters = 0` a single labelling pass runs (it shows up on the
//! operation meters) but no update, and the iteration count stays 0.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{CentroidSet, ClusterAssignment, Dataset};
use crate::lloyd::{assign_and_accumulate, centers_converged, finalize_centers, OpCounters};
use crate::{Error, Result};

/// Outcome of a plaintext k-means run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleResult {
    pub labels: ClusterAssignment,
    pub centers: CentroidSet,
    /// Completed assign+update passes (the confirming pass included).
    pub iterations: u64,
    pub converged: bool,
    pub ops: OpCounters,
    /// Assignment after each pass, oldest first; one extra leading entry for
    /// the labelling-only pass when `max_iters = 0`.
    pub round_labels: Vec<ClusterAssignment>,
}

/// Picks `k` distinct point ids as initial centers, uniformly without
/// replacement, sorted ascending so cluster numbering is reproducible.
pub fn sample_init_ids(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<u64>> {
    if k == 0 || k > ds.len() {
        return Err(Error::InvalidParameter(format!(
            "k must be in [1, {}], got {k}",
            ds.len()
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut ids: Vec<u64> = rand::seq::index::sample(&mut rng, ds.len(), k)
        .into_iter()
        .map(|i| ds.points()[i].id)
        .collect();
    ids.sort_unstable();
    Ok(ids)
}

fn centers_from_ids(ds: &Dataset, init_ids: &[u64]) -> Result<Vec<Vec<f64>>> {
    let by_id: BTreeMap<u64, &[f64]> =
        ds.points().iter().map(|p| (p.id, p.coords.as_slice())).collect();
    let mut seen = BTreeMap::new();
    init_ids
        .iter()
        .map(|id| {
            if seen.insert(*id, ()).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate initial center id {id}")));
            }
            by_id
                .get(id)
                .map(|c| c.to_vec())
                .ok_or_else(|| Error::InvalidParameter(format!("initial center id {id} not in dataset")))
        })
        .collect()
}

/// Plaintext Lloyd's method from explicit initial center ids.
pub fn lloyd(
    ds: &Dataset,
    k: usize,
    init_ids: &[u64],
    tolerance: f64,
    max_iters: u64,
) -> Result<OracleResult> {
    if k == 0 || k > ds.len() {
        return Err(Error::InvalidParameter(format!(
            "k must be in [1, {}], got {k}",
            ds.len()
        )));
    }
    if init_ids.len() != k {
        return Err(Error::InvalidParameter(format!(
            "{} initial centers for k = {k}",
            init_ids.len()
        )));
    }
    if !(tolerance >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be >= 0, got {tolerance}")));
    }
    let centers = centers_from_ids(ds, init_ids)?;
    let points: Vec<(u64, Vec<f64>)> =
        ds.points().iter().map(|p| (p.id, p.coords.clone())).collect();
    run_from_centers(&points, centers, tolerance, max_iters)
}

/// The shared iteration driver, also reused by tests that start from raw
/// center coordinates rather than point ids.
pub fn run_from_centers(
    points: &[(u64, Vec<f64>)],
    mut centers: Vec<Vec<f64>>,
    tolerance: f64,
    max_iters: u64,
) -> Result<OracleResult> {
    let mut ops = OpCounters::default();
    let mut round_labels = Vec::new();
    let mut iterations = 0u64;
    let mut converged = false;
    let mut labels;

    if max_iters == 0 {
        let (pairs, _, _) = assign_and_accumulate(points, &centers, &mut ops);
        labels = pairs;
        round_labels.push(ClusterAssignment::from_pairs(labels.clone()));
    } else {
        loop {
            let (pairs, sums, counts) = assign_and_accumulate(points, &centers, &mut ops);
            let (new_centers, _) = finalize_centers(&sums, &counts, &centers, &mut ops);
            iterations += 1;
            labels = pairs;
            round_labels.push(ClusterAssignment::from_pairs(labels.clone()));
            let done = centers_converged(&centers, &new_centers, tolerance);
            centers = new_centers;
            if done {
                converged = true;
                break;
            }
            if iterations == max_iters {
                break;
            }
        }
    }

    Ok(OracleResult {
        labels: ClusterAssignment::from_pairs(labels),
        centers: CentroidSet::new(centers)?,
        iterations,
        converged,
        ops,
        round_labels,
    })
}

/// Within-cluster sum of squared distances — the objective Lloyd's method
/// never increases.
pub fn within_cluster_ss(
    points: &[(u64, Vec<f64>)],
    labels: &ClusterAssignment,
    centers: &CentroidSet,
) -> Result<f64> {
    let mut total = 0.0;
    for (id, coords) in points {
        let c = labels
            .get(*id)
            .ok_or_else(|| Error::InvalidParameter(format!("point {id} missing a label")))?;
        total += crate::lloyd::squared_distance(coords, &centers.centers()[c]);
    }
    Ok(total)
}

/// Operation counts for running k-means locally versus through the protocol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineCost {
    /// Distance-term multiplications for a purely local run: `n*k*d*m`.
    pub local_distance_multiplications: u64,
    /// Owner's transform multiplications when outsourcing: `n*d`.
    pub owner_transform_multiplications: u64,
    /// Compute servers' multiplications across shares and rounds: `k*n*d*m`.
    pub server_assignment_multiplications: u64,
    /// Aggregator inversions across rounds: `m*k`.
    pub aggregator_inversions: u64,
}

/// Evaluates the local-baseline and protocol cost rows at a concrete shape.
pub fn baseline_cost(n: u64, k: u64, d: u64, m: u64) -> BaselineCost {
    BaselineCost {
        local_distance_multiplications: n * k * d * m,
        owner_transform_multiplications: n * d,
        server_assignment_multiplications: k * n * d * m,
        aggregator_inversions: m * k,
    }
}

/// Cost rows for the secret-sharing alternative the protocol is compared
/// against: the owner shatters each point into `t` residues (inversion-grade
/// modulo ops) and the servers pay a CRT reconstruction quadratic in the
/// modulus for every point and round. Kept as magnitudes — this scheme is
/// modeled, not implemented.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSchemeCost {
    /// `n*t` owner-side modulo/inversion operations.
    pub owner_inversions: f64,
    /// `n*modulus^2*m` reconstruction steps across servers.
    pub server_crt_steps: f64,
}

pub fn prior_scheme_cost(n: u64, t: u64, modulus: f64, m: u64) -> PriorSchemeCost {
    PriorSchemeCost {
        owner_inversions: (n * t) as f64,
        server_crt_steps: n as f64 * modulus * modulus * m as f64,
    }
}
