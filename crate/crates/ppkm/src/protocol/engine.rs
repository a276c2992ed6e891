//! The run coordinator: owner-side envelope routing, round stepping, and
//! the in-process transport.
//!
//! All traffic flows through one queue processed in FIFO order, with new
//! envelopes appended as parties respond. Because every actor is
//! deterministic and the owner emits setup envelopes in a fixed order
//! (aggregator first, then servers by index), the whole delivery sequence —
//! and therefore the transcript — is a pure function of the dataset and the
//! configuration. The socket transport preserves this by being lock-step:
//! the coordinator knows exactly how many envelopes each delivery provokes
//! and reads exactly that many back.

use std::collections::{BTreeMap, VecDeque};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{CentroidSet, ClusterAssignment, Dataset, Point};
use crate::lloyd::OpCounters;
use crate::params::BoundReport;
use crate::protocol::actors::{AggregatorActor, ComputeServerActor, OwnerActor};
use crate::protocol::messages::Message;
use crate::protocol::transcript::RunTranscript;
use crate::protocol::{Outgoing, PartyId};
use crate::transform::PartitionStrategy;
use crate::{Error, Result};

/// Where the non-owner parties live.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transport {
    /// Compute servers and aggregator hosted in this process; delivery is a
    /// direct call. The default, and the only mode whose transcript carries
    /// their operation counters.
    InProcess,
    /// Remote parties reached over framed TCP streams. `compute[i]` is the
    /// `host:port` of compute server `i + 1`; all op metering happens in the
    /// remote processes, so those counters read zero here.
    Tcp { compute: Vec<String>, aggregator: String },
}

/// Everything that determines a run besides the dataset itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Number of clusters.
    pub k: usize,
    /// Total servers: `t - 1` compute servers plus the aggregator.
    pub t: usize,
    /// Relative center-movement tolerance for convergence; `0` demands
    /// exact equality.
    pub tolerance: f64,
    /// Iteration budget; `0` runs a single labelling pass.
    pub max_iters: u64,
    /// Master seed; every random choice in the run derives from it.
    pub seed: u64,
    /// Magnitude class (bit length) of scales, shifts and mask keys.
    pub ell1: u32,
    /// Precision (bit length) of the sampled noise values.
    pub ell2: u32,
    /// `Some(w)`: use the weak constant-based parameter rule instead of
    /// scanning the dataset for strict bounds.
    pub weak_w: Option<f64>,
    pub partition: PartitionStrategy,
    pub transport: Transport,
}

impl Default for RunConfig {
    /// Defaults mirror the CLI: 2 clusters over 3 servers, strict bounds,
    /// `ell1 = 34`, `ell2 = 32`, relative tolerance `1e-9`, 100 iterations.
    fn default() -> Self {
        RunConfig {
            k: 2,
            t: 3,
            tolerance: 1e-9,
            max_iters: 100,
            seed: 0,
            ell1: 34,
            ell2: 32,
            weak_w: None,
            partition: PartitionStrategy::RoundRobin,
            transport: Transport::InProcess,
        }
    }
}

impl RunConfig {
    pub(crate) fn validate(&self, ds: &Dataset) -> Result<()> {
        if self.t < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 servers (1 compute + aggregator), got t = {}",
                self.t
            )));
        }
        if self.k == 0 || self.k > ds.len() {
            return Err(Error::InvalidParameter(format!(
                "k must be in [1, {}], got {}",
                ds.len(),
                self.k
            )));
        }
        if ds.len() < self.t - 1 {
            return Err(Error::InvalidParameter(format!(
                "{} points cannot cover {} compute servers",
                ds.len(),
                self.t - 1
            )));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be >= 0, got {}",
                self.tolerance
            )));
        }
        if let Transport::Tcp { compute, .. } = &self.transport {
            if compute.len() != self.t - 1 {
                return Err(Error::InvalidParameter(format!(
                    "{} compute addresses for t - 1 = {} servers",
                    compute.len(),
                    self.t - 1
                )));
            }
        }
        Ok(())
    }
}

/// Per-purpose sub-seeds fanned out from one master seed.
///
/// Every random choice in a run draws from its own slot, in this fixed
/// order, so adding a consumer can never reshuffle the existing ones. The
/// fan-out is public so that out-of-band tools can line up with a run —
/// most usefully, a plaintext clustering seeded with `init_centers` picks
/// the same starting centers as a protocol run under `master`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SubSeeds {
    /// Scale/shift/noise sampling.
    pub params: u64,
    /// Initial center selection.
    pub init_centers: u64,
    /// First-round mask keys.
    pub keys: u64,
    /// Point-to-server partitioning.
    pub partition: u64,
    /// Base for per-batch noise when points are inserted mid-run.
    pub inserts: u64,
}

impl SubSeeds {
    pub fn derive(master: u64) -> SubSeeds {
        let mut seeder = ChaCha20Rng::seed_from_u64(master);
        SubSeeds {
            params: seeder.next_u64(),
            init_centers: seeder.next_u64(),
            keys: seeder.next_u64(),
            partition: seeder.next_u64(),
            inserts: seeder.next_u64(),
        }
    }
}

/// The coordinator's handle on the non-owner parties.
///
/// `request` delivers one envelope and returns the recipient's immediate
/// responses as `(to, message, body)` triples, the response sender being the
/// party delivered to. `expect_replies` tells a socket implementation how
/// many envelopes to read back; in-process delivery learns it synchronously
/// and may ignore it.
pub(crate) trait PartyChannels {
    fn request(
        &mut self,
        from: PartyId,
        to: PartyId,
        message: &Message,
        body: &[u8],
        expect_replies: usize,
    ) -> Result<Vec<(PartyId, Message, Vec<u8>)>>;

    /// Operation counters for parties hosted in this process. Remote
    /// parties meter themselves; they are absent here.
    fn hosted_ops(&mut self) -> BTreeMap<PartyId, OpCounters>;

    /// Per-round share labels for each hosted compute server. Empty when
    /// the servers are remote.
    fn hosted_round_labels(&mut self) -> Vec<Vec<Vec<(u64, usize)>>>;

    /// Tears the channels down once the owner holds every report.
    fn shutdown(&mut self) -> Result<()>;
}

/// All parties in one process, delivery by direct call.
pub(crate) struct InProcessChannels {
    servers: Vec<ComputeServerActor>,
    aggregator: AggregatorActor,
}

impl InProcessChannels {
    pub(crate) fn new(t: usize) -> InProcessChannels {
        InProcessChannels {
            servers: (1..t).map(ComputeServerActor::new).collect(),
            aggregator: AggregatorActor::new(),
        }
    }
}

impl PartyChannels for InProcessChannels {
    fn request(
        &mut self,
        _from: PartyId,
        to: PartyId,
        message: &Message,
        body: &[u8],
        _expect_replies: usize,
    ) -> Result<Vec<(PartyId, Message, Vec<u8>)>> {
        let unknown = || Error::Protocol {
            role: PartyId::Owner,
            round: 0,
            msg: format!("no channel to {to}"),
        };
        let outgoing = match to {
            PartyId::ComputeServer(i) => self
                .servers
                .get_mut(i.wrapping_sub(1))
                .ok_or_else(unknown)?
                .handle(message, body)?,
            PartyId::Aggregator => self.aggregator.handle(message, body)?,
            PartyId::Owner => return Err(unknown()),
        };
        encode_outgoing(outgoing)
    }

    fn hosted_ops(&mut self) -> BTreeMap<PartyId, OpCounters> {
        let mut ops: BTreeMap<PartyId, OpCounters> = self
            .servers
            .iter()
            .enumerate()
            .map(|(i, s)| (PartyId::ComputeServer(i + 1), s.ops()))
            .collect();
        ops.insert(PartyId::Aggregator, self.aggregator.ops());
        ops
    }

    fn hosted_round_labels(&mut self) -> Vec<Vec<Vec<(u64, usize)>>> {
        self.servers.iter().map(|s| s.labels_per_round().to_vec()).collect()
    }

    fn shutdown(&mut self) -> Result<()> {
        Ok(())
    }
}

pub(crate) fn encode_outgoing(
    outgoing: Vec<Outgoing>,
) -> Result<Vec<(PartyId, Message, Vec<u8>)>> {
    outgoing
        .into_iter()
        .map(|o| {
            let body = o.message.encode()?;
            Ok((o.to, o.message, body))
        })
        .collect()
}

struct Envelope {
    from: PartyId,
    to: PartyId,
    message: Message,
    body: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    /// Setup envelopes queued; no centroid broadcast seen yet.
    Setup,
    /// The owner has folded a centroid broadcast; the servers' copies wait
    /// in the queue. The only point where insertion is accepted.
    Boundary,
    /// Every server has reported its labels.
    Complete,
}

/// What one [`ProtocolRun::step`] call accomplished.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepStatus {
    /// One more round folded into the owner's view. When `stop` is set the
    /// stopping rule fired and the next step runs the closing sweep.
    Round { iterations: u64, stop: bool },
    /// The run is over and the outcome can be taken.
    Finished,
}

/// Result of a completed run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    /// Final cluster label for every point id.
    pub labels: ClusterAssignment,
    /// Final centers in the transformed (perturbed) space — what the
    /// servers actually converged on.
    pub centers: CentroidSet,
    /// The owner's de-perturbed view of those centers: shift removed and
    /// scale divided out. Approximate, since the per-point noise does not
    /// cancel exactly.
    pub approx_original_centers: Vec<Vec<f64>>,
    /// Completed assign + update rounds, the confirming one included.
    pub iterations: u64,
    pub converged: bool,
    /// Ids of the points the owner picked as initial centers.
    pub init_center_ids: Vec<u64>,
    /// The parameter bounds the run was sampled under.
    pub bounds: BoundReport,
    pub transcript: RunTranscript,
}

/// A protocol run in progress, stepped one round at a time.
///
/// [`run`] drives this to completion in one call; the step interface exists
/// so callers can inspect rounds and feed in new points mid-run.
pub struct ProtocolRun {
    owner: OwnerActor,
    channels: Box<dyn PartyChannels>,
    transcript: RunTranscript,
    queue: VecDeque<Envelope>,
    phase: Phase,
    t: usize,
    shares_this_round: usize,
}

impl ProtocolRun {
    /// Validates the configuration, builds every party, and queues the
    /// setup envelopes. Nothing is delivered until the first [`step`].
    ///
    /// [`step`]: ProtocolRun::step
    pub fn start(ds: &Dataset, cfg: &RunConfig) -> Result<ProtocolRun> {
        let (owner, setup) = OwnerActor::new(ds, cfg)?;
        let channels: Box<dyn PartyChannels> = match &cfg.transport {
            Transport::InProcess => Box::new(InProcessChannels::new(cfg.t)),
            Transport::Tcp { compute, aggregator } => Box::new(
                crate::protocol::tcp::TcpChannels::connect(compute, aggregator)?,
            ),
        };
        let mut run = ProtocolRun {
            owner,
            channels,
            transcript: RunTranscript::default(),
            queue: VecDeque::new(),
            phase: Phase::Setup,
            t: cfg.t,
            shares_this_round: 0,
        };
        run.enqueue_from_owner(setup)?;
        Ok(run)
    }

    fn enqueue_from_owner(&mut self, outgoing: Vec<Outgoing>) -> Result<()> {
        for (to, message, body) in encode_outgoing(outgoing)? {
            self.queue.push_back(Envelope { from: PartyId::Owner, to, message, body });
        }
        Ok(())
    }

    /// Rounds the owner has folded so far.
    pub fn iterations(&self) -> u64 {
        self.owner.iterations()
    }

    /// Drives the run to its next pause point: the owner folding one more
    /// centroid broadcast, or completion.
    pub fn step(&mut self) -> Result<StepStatus> {
        if self.phase == Phase::Complete {
            return Ok(StepStatus::Finished);
        }
        while let Some(env) = self.queue.pop_front() {
            self.transcript.log(env.from, env.to, &env.message, env.body.len());
            if env.to == PartyId::Owner {
                match &env.message {
                    Message::Centroids { round, scaled_centers } => {
                        self.note_empty_clusters(*round, scaled_centers);
                        let stop = self.owner.on_centroids(&env.message, &env.body)?;
                        self.phase = Phase::Boundary;
                        return Ok(StepStatus::Round {
                            iterations: self.owner.iterations(),
                            stop,
                        });
                    }
                    Message::Done { .. } => {
                        self.owner.on_done(env.from, &env.message)?;
                        if self.owner.all_done() && self.queue.is_empty() {
                            self.complete()?;
                            return Ok(StepStatus::Finished);
                        }
                    }
                    other => {
                        return Err(Error::Protocol {
                            role: PartyId::Owner,
                            round: self.owner.iterations(),
                            msg: format!("unexpected message {}", other.kind()),
                        })
                    }
                }
            } else {
                let expect = self.expected_replies(&env);
                let in_flight = self.owner.iterations() + 1;
                let replies = self
                    .channels
                    .request(env.from, env.to, &env.message, &env.body, expect)
                    .map_err(|e| match e {
                        Error::Transport { role, source, .. } => {
                            Error::Transport { role, round: in_flight, source }
                        }
                        other => other,
                    })?;
                for (to, message, body) in replies {
                    self.queue.push_back(Envelope { from: env.to, to, message, body });
                }
            }
        }
        Err(Error::Protocol {
            role: PartyId::Owner,
            round: self.owner.iterations(),
            msg: "the run stalled with no envelopes in flight".into(),
        })
    }

    /// How many envelopes the recipient will emit in response — the socket
    /// transport's read count. Init and Centroids each provoke exactly one
    /// reply from a server (its next share, or its final report); the share
    /// that completes a round provokes the full broadcast.
    fn expected_replies(&mut self, env: &Envelope) -> usize {
        match (&env.message, env.to) {
            (Message::Init { .. }, PartyId::ComputeServer(_)) => 1,
            (Message::Centroids { .. }, PartyId::ComputeServer(_)) => 1,
            (Message::Shares { .. }, PartyId::Aggregator) => {
                self.shares_this_round += 1;
                if self.shares_this_round == self.t - 1 {
                    self.shares_this_round = 0;
                    self.t
                } else {
                    0
                }
            }
            _ => 0,
        }
    }

    fn note_empty_clusters(&mut self, round: u64, scaled: &[Option<Vec<f64>>]) {
        let empties: Vec<usize> = scaled
            .iter()
            .enumerate()
            .filter_map(|(j, c)| c.is_none().then_some(j))
            .collect();
        if !empties.is_empty() {
            self.transcript.empty_cluster_rounds.push((round, empties));
        }
    }

    /// Feeds new points into the run. Only accepted while paused at a round
    /// boundary whose stopping rule has not fired; the points are perturbed
    /// with fresh noise and join the very next assignment pass.
    pub fn insert_points(&mut self, points: &[Point]) -> Result<()> {
        match self.phase {
            Phase::Boundary if !self.owner.stopping() => {}
            Phase::Boundary | Phase::Complete => return Err(Error::InsertAfterConvergence),
            Phase::Setup => {
                return Err(Error::Protocol {
                    role: PartyId::Owner,
                    round: 0,
                    msg: "points can only be inserted at a round boundary".into(),
                })
            }
        }
        let outgoing = self.owner.prepare_insert(points)?;
        // Insertions go to the front of the queue, ahead of the pending
        // centroid forwards, so the servers hold the points before they
        // compute the next round.
        for (to, message, body) in encode_outgoing(outgoing)?.into_iter().rev() {
            self.queue.push_front(Envelope { from: PartyId::Owner, to, message, body });
        }
        Ok(())
    }

    fn complete(&mut self) -> Result<()> {
        self.phase = Phase::Complete;
        self.channels.shutdown()?;
        {
            let owner = self.transcript.counters.entry(PartyId::Owner).or_default();
            owner.transform_ops = self.owner.transform_ops();
            owner.ops = self.owner.ops();
        }
        for (party, ops) in self.channels.hosted_ops() {
            self.transcript.counters.entry(party).or_default().ops = ops;
        }
        let per_server = self.channels.hosted_round_labels();
        let rounds = per_server.iter().map(Vec::len).max().unwrap_or(0);
        let mut merged: Vec<Vec<(u64, usize)>> = vec![Vec::new(); rounds];
        for server_rounds in &per_server {
            for (r, labels) in server_rounds.iter().enumerate() {
                merged[r].extend_from_slice(labels);
            }
        }
        self.transcript.round_assignments =
            merged.into_iter().map(ClusterAssignment::from_pairs).collect();
        self.transcript.iterations = self.owner.iterations();
        self.transcript.converged = self.owner.converged();
        Ok(())
    }

    /// Steps until every server has reported, then assembles the outcome.
    pub fn run_to_completion(mut self) -> Result<RunOutcome> {
        loop {
            if let StepStatus::Finished = self.step()? {
                return self.into_outcome();
            }
        }
    }

    /// Takes the outcome of a completed run.
    pub fn into_outcome(self) -> Result<RunOutcome> {
        if self.phase != Phase::Complete {
            return Err(Error::Protocol {
                role: PartyId::Owner,
                round: self.owner.iterations(),
                msg: "the run has not completed".into(),
            });
        }
        let (labels, centers, approx_original_centers) = self.owner.finish()?;
        Ok(RunOutcome {
            labels,
            centers,
            approx_original_centers,
            iterations: self.owner.iterations(),
            converged: self.owner.converged(),
            init_center_ids: self.owner.init_center_ids().to_vec(),
            bounds: self.owner.bounds().clone(),
            transcript: self.transcript,
        })
    }
}

/// Runs the protocol end to end for one dataset and configuration.
pub fn run(ds: &Dataset, cfg: &RunConfig) -> Result<RunOutcome> {
    ProtocolRun::start(ds, cfg)?.run_to_completion()
}
