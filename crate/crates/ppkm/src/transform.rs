//! The owner-side perturbation and dataset partitioning.
//!
//! Each coordinate is mapped as `x' = (scale + eps) * x + shift` with one
//! scale/shift pair per dimension and one noise value per point. Distances
//! between perturbed points then approximate `common_scale * distance` —
//! shifts cancel, noise stays small by construction — which is what lets the
//! compute servers run Lloyd's method without seeing the data.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Point};
use crate::lloyd::OpCounters;
use crate::params::RandomizationParams;
use crate::{Error, Result};

/// One perturbed point: same id, transformed coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformedPoint {
    pub id: u64,
    pub coords: Vec<f64>,
}

/// Applies the perturbation to every point. Counts one multiplication per
/// coordinate on the owner's meter (`(scale + eps) * x`; the scale/noise and
/// shift combinations are additions).
pub fn randomize(
    ds: &Dataset,
    params: &RandomizationParams,
    ops: &mut OpCounters,
) -> Result<Vec<TransformedPoint>> {
    if params.dim() != ds.dim() {
        return Err(Error::DimensionMismatch { expected: ds.dim(), got: params.dim() });
    }
    if params.epsilons.len() != ds.len() {
        return Err(Error::InvalidParameter(format!(
            "{} noise entries for {} points",
            params.epsilons.len(),
            ds.len()
        )));
    }
    Ok(ds
        .points()
        .iter()
        .zip(&params.epsilons)
        .map(|(p, &eps)| transform_point(p, eps, params, ops))
        .collect())
}

/// Perturbs points that join after the initial transform, with their own
/// fresh noise values but the original scales and shifts.
pub fn randomize_incremental(
    points: &[Point],
    epsilons: &[f64],
    params: &RandomizationParams,
    ops: &mut OpCounters,
) -> Result<Vec<TransformedPoint>> {
    if epsilons.len() != points.len() {
        return Err(Error::InvalidParameter(format!(
            "{} noise entries for {} points",
            epsilons.len(),
            points.len()
        )));
    }
    points
        .iter()
        .zip(epsilons)
        .map(|(p, &eps)| {
            if p.coords.len() != params.dim() {
                return Err(Error::DimensionMismatch {
                    expected: params.dim(),
                    got: p.coords.len(),
                });
            }
            Ok(transform_point(p, eps, params, ops))
        })
        .collect()
}

fn transform_point(
    p: &Point,
    eps: f64,
    params: &RandomizationParams,
    ops: &mut OpCounters,
) -> TransformedPoint {
    let coords = p
        .coords
        .iter()
        .enumerate()
        .map(|(j, &x)| (params.scale(j) + eps) * x + params.shift(j))
        .collect();
    ops.multiplications += p.coords.len() as u64;
    ops.additions += 2 * p.coords.len() as u64;
    TransformedPoint { id: p.id, coords }
}

/// How the owner splits the perturbed dataset across compute servers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionStrategy {
    /// Point `i` goes to server `i mod servers`.
    RoundRobin,
    /// Consecutive blocks, sized as evenly as possible (earlier servers get
    /// the remainder).
    Contiguous,
    /// A seeded shuffle dealt round-robin; balanced but order-free.
    Shuffled,
}

/// Assigns each point (by position) to a compute server.
///
/// Every strategy is deterministic — `Shuffled` takes its seed explicitly —
/// and every server receives at least one point when `points >= servers`.
pub fn partition(
    count: usize,
    servers: usize,
    strategy: PartitionStrategy,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if servers == 0 {
        return Err(Error::InvalidParameter("need at least one compute server".into()));
    }
    if count < servers {
        return Err(Error::InvalidParameter(format!(
            "cannot spread {count} points over {servers} servers without empty shares"
        )));
    }
    let mut shares = vec![Vec::new(); servers];
    match strategy {
        PartitionStrategy::RoundRobin => {
            for i in 0..count {
                shares[i % servers].push(i);
            }
        }
        PartitionStrategy::Contiguous => {
            let base = count / servers;
            let extra = count % servers;
            let mut next = 0;
            for (s, share) in shares.iter_mut().enumerate() {
                let size = base + usize::from(s < extra);
                share.extend(next..next + size);
                next += size;
            }
        }
        PartitionStrategy::Shuffled => {
            let mut order: Vec<usize> = (0..count).collect();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            order.shuffle(&mut rng);
            for (i, idx) in order.into_iter().enumerate() {
                shares[i % servers].push(idx);
            }
            for share in &mut shares {
                share.sort_unstable();
            }
        }
    }
    Ok(shares)
}

/// Serializable share listing for handing a server its slice out of band.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShareFile {
    pub server: usize,
    pub points: Vec<TransformedPoint>,
}

/// Materialises per-server share files from a partition.
pub fn export_shares(
    transformed: &[TransformedPoint],
    shares: &[Vec<usize>],
) -> Vec<ShareFile> {
    shares
        .iter()
        .enumerate()
        .map(|(server, idxs)| ShareFile {
            server,
            points: idxs.iter().map(|&i| transformed[i].clone()).collect(),
        })
        .collect()
}
