//! The multi-party clustering protocol.
//!
//! Three kinds of party cooperate. The *owner* holds the plaintext data:
//! it perturbs the points, splits them into shares, picks initial centers
//! and hands out the round-1 mask keys. `t - 1` *compute servers* each hold
//! one share of perturbed points and run the assignment step of Lloyd's
//! method locally, sending only masked per-cluster sums and counts onward.
//! The *aggregator* (server `t`) folds those masked shares into scaled
//! centroids and broadcasts them back; it never holds points or keys, so its
//! whole view is scaled by the round's unknown mask ratio.
//!
//! Module layout: [`messages`] defines the wire schema and framing,
//! [`actors`] the per-role state machines and the four primitive protocol
//! steps, [`engine`] the transport-agnostic coordinator loop plus the
//! in-process transport, [`tcp`] the socket transport and serve loops, and
//! [`transcript`] the observability record every run produces.
//!
//! Topology is a star around the owner: in both transports every envelope
//! passes through the owner-side coordinator, which relays it verbatim.
//! That costs nothing in privacy — the owner already knows the data and the
//! keys — and buys a single deterministic delivery order, which is what
//! makes transcripts byte-reproducible and the two transports bit-identical.

pub mod actors;
pub mod engine;
pub mod messages;
pub mod tcp;
pub mod transcript;

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use actors::{
    aggregate, assign_clusters, mask_share, unscale_centroids, AggregatorActor,
    ComputeServerActor, MaskedShare, OwnerActor,
};
pub use engine::{run, ProtocolRun, RunConfig, RunOutcome, SubSeeds, Transport};
pub use messages::Message;
pub use transcript::{LoggedMessage, PartyCounters, RunTranscript};

/// Logical address of one protocol participant.
///
/// Serialized as the strings `"owner"`, `"server1"` … `"serverN"` (1-based)
/// and `"aggregator"` so it can key JSON maps. Ordering is owner, then
/// compute servers by index, then aggregator — the canonical delivery order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PartyId {
    Owner,
    ComputeServer(usize),
    Aggregator,
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartyId::Owner => f.write_str("owner"),
            PartyId::ComputeServer(i) => write!(f, "server{i}"),
            PartyId::Aggregator => f.write_str("aggregator"),
        }
    }
}

impl FromStr for PartyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "owner" => Ok(PartyId::Owner),
            "aggregator" => Ok(PartyId::Aggregator),
            _ => {
                let idx = s
                    .strip_prefix("server")
                    .and_then(|n| n.parse::<usize>().ok())
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| format!("unknown party {s:?}"))?;
                Ok(PartyId::ComputeServer(idx))
            }
        }
    }
}

impl Serialize for PartyId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PartyId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// An addressed message an actor wants delivered.
#[derive(Clone, Debug)]
pub struct Outgoing {
    pub to: PartyId,
    pub message: Message,
}
