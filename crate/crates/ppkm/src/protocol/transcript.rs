//! Run transcripts: the ordered message log plus per-party meters.
//!
//! The coordinator sits on every channel (star topology), so it can log all
//! traffic in the exact order it relays it. Two runs with the same config
//! and seeds produce byte-identical serialized transcripts; that property is
//! load-bearing (it is how determinism is tested) so everything in here
//! iterates in fixed orders — `BTreeMap`, never `HashMap`.
//!
//! Byte meters count message-body bytes (the canonical JSON encoding), not
//! socket framing, so the in-process and socket transports meter alike.
//! Operation meters are filled from actors hosted in this process; a socket
//! run reports zeros for remote parties (their meters live in their own
//! processes), while byte counts are always complete.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::ClusterAssignment;
use crate::lloyd::OpCounters;
use crate::protocol::messages::Message;
use crate::protocol::PartyId;
use crate::Result;

/// One relayed envelope, in delivery order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoggedMessage {
    pub seq: u64,
    pub from: PartyId,
    pub to: PartyId,
    /// Length of the canonical message encoding.
    pub bytes: u64,
    pub message: Message,
}

/// Meters for one party.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PartyCounters {
    /// Owner only: operations spent perturbing points before the run.
    pub transform_ops: OpCounters,
    /// Operations during the iterative phase.
    pub ops: OpCounters,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub messages_sent: u64,
    pub messages_received: u64,
}

/// Complete record of one protocol run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTranscript {
    pub messages: Vec<LoggedMessage>,
    pub counters: BTreeMap<PartyId, PartyCounters>,
    /// Completed assignment rounds, confirming round included.
    pub iterations: u64,
    pub converged: bool,
    /// Merged per-round assignments (instrumentation, in-process transport
    /// only; empty over sockets where server state is out of reach).
    pub round_assignments: Vec<ClusterAssignment>,
    /// Rounds in which at least one cluster came back empty, with the
    /// affected cluster indices; centers were carried forward there.
    pub empty_cluster_rounds: Vec<(u64, Vec<usize>)>,
}

impl RunTranscript {
    /// Logs one relayed envelope and updates both endpoints' byte meters.
    pub fn log(&mut self, from: PartyId, to: PartyId, message: &Message, body_len: usize) {
        let seq = self.messages.len() as u64;
        self.messages.push(LoggedMessage {
            seq,
            from,
            to,
            bytes: body_len as u64,
            message: message.clone(),
        });
        let sender = self.counters.entry(from).or_default();
        sender.bytes_sent += body_len as u64;
        sender.messages_sent += 1;
        let receiver = self.counters.entry(to).or_default();
        receiver.bytes_received += body_len as u64;
        receiver.messages_received += 1;
    }

    pub fn counters_for(&self, party: PartyId) -> PartyCounters {
        self.counters.get(&party).cloned().unwrap_or_default()
    }

    /// The message log as JSON lines, one envelope per line — the export
    /// format for `transcript.jsonl`.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for m in &self.messages {
            out.push_str(&serde_json::to_string(m)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Canonical encoding of the whole transcript, used for byte-equality
    /// checks between runs.
    pub fn to_canonical_json(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logging_updates_both_endpoints() {
        let mut t = RunTranscript::default();
        let msg = Message::Header { k: 2, t: 3, dim: 1, tolerance: 0.0, max_iters: 9, ell1: 34 };
        let len = msg.encode().unwrap().len();
        t.log(PartyId::Owner, PartyId::Aggregator, &msg, len);
        t.log(PartyId::Owner, PartyId::ComputeServer(1), &msg, len);

        let owner = t.counters_for(PartyId::Owner);
        assert_eq!(owner.messages_sent, 2);
        assert_eq!(owner.bytes_sent, 2 * len as u64);
        assert_eq!(owner.messages_received, 0);
        let agg = t.counters_for(PartyId::Aggregator);
        assert_eq!(agg.messages_received, 1);
        assert_eq!(agg.bytes_received, len as u64);
        assert_eq!(t.messages[0].seq, 0);
        assert_eq!(t.messages[1].seq, 1);
    }

    #[test]
    fn jsonl_export_is_one_line_per_message() {
        let mut t = RunTranscript::default();
        let msg = Message::Centroids { round: 1, scaled_centers: vec![Some(vec![2.5])] };
        let len = msg.encode().unwrap().len();
        t.log(PartyId::Aggregator, PartyId::Owner, &msg, len);
        t.log(PartyId::Aggregator, PartyId::ComputeServer(1), &msg, len);
        let jsonl = t.to_jsonl().unwrap();
        let lines: Vec<&str> = jsonl.lines().collect();
        assert_eq!(lines.len(), 2);
        let v: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(v["from"], "aggregator");
        assert_eq!(v["message"]["type"], "centroids");
    }

    #[test]
    fn canonical_encoding_is_stable() {
        let mut a = RunTranscript::default();
        let mut b = RunTranscript::default();
        for t in [&mut a, &mut b] {
            let msg = Message::Insert { points: vec![] };
            let len = msg.encode().unwrap().len();
            t.log(PartyId::Owner, PartyId::ComputeServer(2), &msg, len);
            t.iterations = 4;
            t.converged = true;
            t.empty_cluster_rounds.push((2, vec![0]));
        }
        assert_eq!(a.to_canonical_json().unwrap(), b.to_canonical_json().unwrap());
    }
}
