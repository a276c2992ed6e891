//! Wire schema and framing.
//!
//! Every message is a JSON object with a `type` tag and fixed field names;
//! floats serialize as shortest round-trip decimals, so encoding the decoded
//! form reproduces the original bytes. That byte stability matters: the key
//! schedule hashes the broadcast payload, and all parties must hash the same
//! bytes.
//!
//! On sockets each envelope is two frames, each `[u32 big-endian length ||
//! bytes]`: first a small routing header (`from`/`to`), then the message
//! body. Keeping the body in its own frame means a broadcast can reuse one
//! body buffer for every recipient — the routing differs, the hashed bytes
//! do not.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::keysched::RoundKeys;
use crate::protocol::PartyId;
use crate::transform::TransformedPoint;
use crate::{Error, Result};

/// Upper bound on a single frame; a length prefix beyond this is treated as
/// a corrupt stream rather than an allocation request.
pub const MAX_FRAME_BYTES: u32 = 256 * 1024 * 1024;

/// Everything that crosses a channel between parties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    /// Public run parameters, sent by the owner to every party. Carries no
    /// data-dependent values: the aggregator legitimately learns `k`, `t`
    /// and the dimension, and the stopping rule must be shared so all
    /// parties halt on the same round without a control back-channel.
    /// `ell1` is the public key-magnitude class the mask chain maps into.
    Header { k: usize, t: usize, dim: usize, tolerance: f64, max_iters: u64, ell1: u32 },
    /// Perturbed points for one compute server — both the initial share
    /// provisioning and any later insertions.
    Insert { points: Vec<TransformedPoint> },
    /// Initial centers (perturbed points chosen by the owner) plus the
    /// round-1 mask keys. Never sent to the aggregator.
    Init { centers: Vec<Vec<f64>>, keys: RoundKeys },
    /// One server's masked assignment summary for a round: per cluster, the
    /// coordinate sums times `x` and the point count times `y`.
    Shares { round: u64, server: usize, masked_sums: Vec<Vec<f64>>, masked_counts: Vec<f64> },
    /// The aggregator's broadcast: per cluster the masked-ratio centroid,
    /// or `None` where every server reported the cluster empty.
    Centroids { round: u64, scaled_centers: Vec<Option<Vec<f64>>> },
    /// A compute server's final word to the owner: its share's labels
    /// (sorted by point id) and the centers it finished with.
    Done { labels: Vec<(u64, usize)>, centers: Vec<Vec<f64>> },
}

impl Message {
    /// Canonical byte encoding — the bytes framed on sockets, hashed by the
    /// key schedule, and counted by the byte meters.
    pub fn encode(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn decode(bytes: &[u8]) -> Result<Message> {
        Ok(serde_json::from_slice(bytes)?)
    }

    /// Short name for logs and errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Header { .. } => "header",
            Message::Insert { .. } => "insert",
            Message::Init { .. } => "init",
            Message::Shares { .. } => "shares",
            Message::Centroids { .. } => "centroids",
            Message::Done { .. } => "done",
        }
    }
}

/// Routing header preceding each body frame on sockets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteHeader {
    pub from: PartyId,
    pub to: PartyId,
}

pub fn write_frame<W: Write>(w: &mut W, bytes: &[u8]) -> std::io::Result<()> {
    let len = u32::try_from(bytes.len())
        .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidData, "frame too large"))?;
    if len > MAX_FRAME_BYTES {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, "frame too large"));
    }
    w.write_all(&len.to_be_bytes())?;
    w.write_all(bytes)
}

pub fn read_frame<R: Read>(r: &mut R) -> std::io::Result<Vec<u8>> {
    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes)?;
    let len = u32::from_be_bytes(len_bytes);
    if len > MAX_FRAME_BYTES {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("frame length {len} exceeds limit"),
        ));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

/// Writes one addressed envelope: routing frame, then body frame.
pub fn write_envelope<W: Write>(
    w: &mut W,
    from: PartyId,
    to: PartyId,
    body: &[u8],
) -> Result<()> {
    let header = serde_json::to_vec(&RouteHeader { from, to })?;
    write_frame(w, &header).map_err(Error::Io)?;
    write_frame(w, body).map_err(Error::Io)?;
    w.flush().map_err(Error::Io)?;
    Ok(())
}

/// Reads one addressed envelope; returns the route and the raw body bytes.
pub fn read_envelope<R: Read>(r: &mut R) -> Result<(RouteHeader, Vec<u8>)> {
    let header_bytes = read_frame(r).map_err(Error::Io)?;
    let header: RouteHeader = serde_json::from_slice(&header_bytes)?;
    let body = read_frame(r).map_err(Error::Io)?;
    Ok((header, body))
}
