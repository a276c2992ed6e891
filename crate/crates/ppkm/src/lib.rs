//! Privacy-preserving k-means over horizontally partitioned data.
//!
//! A data owner perturbs every record with a bounded multiplicative/additive
//! transform, splits the perturbed records across `t - 1` compute servers, and
//! lets the servers run Lloyd's iterations on the shares. Per-round partial
//! sums travel to a `t`-th aggregator under fresh multiplicative masks, so the
//! aggregator only ever sees scaled ratios. When the perturbation parameters
//! respect the bounds derived in [`params`], the cluster assignments match a
//! plaintext run of Lloyd's algorithm exactly, iteration by iteration.
//!
//! Module map:
//!
//! * [`dataset`] — points, datasets, CSV I/O, the non-negativity translation.
//! * [`params`] — strict (data-derived) and weak (constant) parameter bounds,
//!   seeded parameter sampling, and the key-length security planner.
//! * [`transform`] — the owner-side perturbation and share partitioning.
//! * [`keysched`] — hash-chained per-round mask keys.
//! * [`protocol`] — the owner / compute-server / aggregator actors, in-process
//!   and TCP transports, transcripts and operation counters.
//! * [`oracle`] — plaintext Lloyd's reference and cost models.
//! * [`analysis`] — perturbation error terms, divergence leakage bounds, and
//!   the brute-force attack cost model.

pub mod analysis;
pub mod dataset;
mod error;
pub mod keysched;
pub mod lloyd;
pub mod oracle;
pub mod params;
pub mod protocol;
pub mod transform;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
