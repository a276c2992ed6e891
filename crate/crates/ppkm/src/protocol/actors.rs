//! Per-role state machines and the four primitive protocol steps.
//!
//! The primitives — assign, mask, aggregate, unscale — are free functions so
//! they can be tested and reasoned about in isolation; the actors are thin
//! stateful shells that sequence them. A compute server and the owner both
//! track centers through a shared [`CenterTracker`], so their convergence
//! decisions are bit-identical by construction rather than by careful
//! duplication.

use std::collections::{BTreeMap, BTreeSet};

use crate::dataset::{CentroidSet, ClusterAssignment, Dataset, Point};
use crate::keysched::{initial_keys, KeyChain, RoundKeys};
use crate::lloyd::{assign_and_accumulate, centers_converged, OpCounters};
use crate::params::{
    sample_fresh_epsilons, sample_params, strict_bounds, weak_bounds, BoundReport,
};
use crate::protocol::engine::{RunConfig, SubSeeds};
use crate::protocol::messages::Message;
use crate::protocol::{Outgoing, PartyId};
use crate::transform::{export_shares, partition, randomize, randomize_incremental};
use crate::{Error, Result};

fn perr(role: PartyId, round: u64, msg: impl Into<String>) -> Error {
    Error::Protocol { role, round, msg: msg.into() }
}

/// Labels a share of points against the current centers and accumulates the
/// per-cluster coordinate sums `d_j` and counts `m_j` — one server's share
/// of one Lloyd's assignment step. Ties go to the lowest cluster index.
pub fn assign_clusters(
    share: &[(u64, Vec<f64>)],
    centers: &[Vec<f64>],
    ops: &mut OpCounters,
) -> (Vec<(u64, usize)>, Vec<Vec<f64>>, Vec<u64>) {
    assign_and_accumulate(share, centers, ops)
}

/// Masks an assignment summary for transit: coordinate sums are scaled by
/// `x`, counts by `y`. Nothing else is hidden — the point of the mask is
/// only that the aggregator can't relate sums to counts.
pub fn mask_share(
    sums: &[Vec<f64>],
    counts: &[u64],
    keys: &RoundKeys,
    ops: &mut OpCounters,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let masked_sums: Vec<Vec<f64>> =
        sums.iter().map(|v| v.iter().map(|s| keys.x * s).collect()).collect();
    let masked_counts: Vec<f64> = counts.iter().map(|&m| keys.y * m as f64).collect();
    ops.multiplications += sums.iter().map(|v| v.len() as u64).sum::<u64>() + counts.len() as u64;
    (masked_sums, masked_counts)
}

/// One server's masked round summary, as the aggregator sees it.
#[derive(Clone, Debug)]
pub struct MaskedShare {
    pub server: usize,
    pub round: u64,
    pub masked_sums: Vec<Vec<f64>>,
    pub masked_counts: Vec<f64>,
}

/// Folds all servers' masked shares into scaled centroids: per cluster,
/// `Σ_i (x·d_ij) / Σ_i (y·m_ij)` — which is `(x/y)` times the true
/// transformed-space centroid. Clusters empty on every server come back as
/// `None`. Division is one reciprocal per non-empty cluster then a multiply
/// per coordinate, which is what the inversion meter counts.
pub fn aggregate(
    shares: &[MaskedShare],
    k: usize,
    dim: usize,
    ops: &mut OpCounters,
) -> Result<(u64, Vec<Option<Vec<f64>>>)> {
    let role = PartyId::Aggregator;
    let first = shares.first().ok_or_else(|| perr(role, 0, "no shares to aggregate"))?;
    let round = first.round;

    let mut seen = BTreeSet::new();
    for s in shares {
        if s.round != round {
            return Err(perr(
                role,
                round,
                format!("share from server{} is for round {}", s.server, s.round),
            ));
        }
        if !seen.insert(s.server) {
            return Err(perr(role, round, format!("duplicate share from server{}", s.server)));
        }
        if s.masked_sums.len() != k
            || s.masked_counts.len() != k
            || s.masked_sums.iter().any(|v| v.len() != dim)
        {
            return Err(perr(role, round, format!("malformed share from server{}", s.server)));
        }
    }

    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0.0; k];
    for s in shares {
        for j in 0..k {
            counts[j] += s.masked_counts[j];
            for (acc, v) in sums[j].iter_mut().zip(&s.masked_sums[j]) {
                *acc += v;
            }
        }
    }
    ops.additions += (shares.len() as u64 - 1) * (k as u64 * (dim as u64 + 1));

    let scaled = sums
        .into_iter()
        .zip(&counts)
        .map(|(sum, &count)| {
            if count == 0.0 {
                None
            } else {
                ops.inversions += 1;
                ops.multiplications += dim as u64;
                let recip = 1.0 / count;
                Some(sum.into_iter().map(|v| v * recip).collect())
            }
        })
        .collect();
    Ok((round, scaled))
}

/// Removes the round mask from the aggregator's broadcast: every scaled
/// center times `y/x` is the true transformed-space centroid. `None`
/// entries (clusters empty everywhere) carry the previous center forward.
pub fn unscale_centroids(
    scaled: &[Option<Vec<f64>>],
    previous: &[Vec<f64>],
    keys: &RoundKeys,
    ops: &mut OpCounters,
) -> Vec<Vec<f64>> {
    let factor = keys.unmask_factor();
    ops.inversions += 1;
    scaled
        .iter()
        .zip(previous)
        .map(|(entry, prev)| match entry {
            Some(center) => {
                ops.multiplications += center.len() as u64;
                center.iter().map(|v| v * factor).collect()
            }
            None => prev.clone(),
        })
        .collect()
}

/// Public run parameters as carried by the header message.
#[derive(Clone, Copy, Debug)]
struct HeaderInfo {
    k: usize,
    t: usize,
    dim: usize,
    tolerance: f64,
    max_iters: u64,
    ell1: u32,
}

impl HeaderInfo {
    fn from_message(role: PartyId, msg: &Message) -> Result<HeaderInfo> {
        match *msg {
            Message::Header { k, t, dim, tolerance, max_iters, ell1 } => {
                if k == 0 || t < 2 || dim == 0 || !(tolerance >= 0.0) || ell1 == 0 {
                    return Err(perr(role, 0, "malformed run header"));
                }
                Ok(HeaderInfo { k, t, dim, tolerance, max_iters, ell1 })
            }
            ref other => Err(perr(role, 0, format!("expected header, got {}", other.kind()))),
        }
    }
}

/// Center state shared by everyone who can unmask: the current centers plus
/// the key chain. Owner and compute servers drive identical trackers with
/// identical inputs, which is what makes their stop decisions agree.
struct CenterTracker {
    centers: Vec<Vec<f64>>,
    chain: KeyChain,
    tolerance: f64,
    max_iters: u64,
}

impl CenterTracker {
    fn new(centers: Vec<Vec<f64>>, keys: RoundKeys, info: &HeaderInfo) -> CenterTracker {
        CenterTracker {
            centers,
            chain: KeyChain::new(keys, info.ell1),
            tolerance: info.tolerance,
            max_iters: info.max_iters,
        }
    }

    /// Applies one centroid broadcast: unscales, checks the stopping rule,
    /// and folds the broadcast bytes into the key chain. Returns
    /// `(stop, by_convergence)`.
    fn apply(
        &mut self,
        role: PartyId,
        round: u64,
        scaled: &[Option<Vec<f64>>],
        body: &[u8],
        ops: &mut OpCounters,
    ) -> Result<(bool, bool)> {
        let keys = self.chain.current();
        if keys.round != round {
            return Err(perr(role, round, format!("keys are at round {}", keys.round)));
        }
        if scaled.len() != self.centers.len() {
            return Err(perr(role, round, "centroid broadcast has wrong cluster count"));
        }
        let dim = self.centers[0].len();
        if scaled.iter().flatten().any(|c| c.len() != dim) {
            return Err(perr(role, round, "centroid broadcast has wrong dimension"));
        }
        let new = unscale_centroids(scaled, &self.centers, &keys, ops);
        let by_convergence = centers_converged(&self.centers, &new, self.tolerance);
        self.centers = new;
        self.chain.advance(body);
        let stop = by_convergence || round >= self.max_iters;
        Ok((stop, by_convergence))
    }
}

/// A compute server: holds one share of perturbed points, assigns them each
/// round, and reports masked summaries. Message-driven; both transports
/// call [`ComputeServerActor::handle`].
pub struct ComputeServerActor {
    index: usize,
    info: Option<HeaderInfo>,
    share: Vec<(u64, Vec<f64>)>,
    pending: Vec<(u64, Vec<f64>)>,
    tracker: Option<CenterTracker>,
    last_labels: Vec<(u64, usize)>,
    labels_per_round: Vec<Vec<(u64, usize)>>,
    ops: OpCounters,
    finished: bool,
}

impl ComputeServerActor {
    pub fn new(index: usize) -> ComputeServerActor {
        ComputeServerActor {
            index,
            info: None,
            share: Vec::new(),
            pending: Vec::new(),
            tracker: None,
            last_labels: Vec::new(),
            labels_per_round: Vec::new(),
            ops: OpCounters::default(),
            finished: false,
        }
    }

    fn role(&self) -> PartyId {
        PartyId::ComputeServer(self.index)
    }

    pub fn ops(&self) -> OpCounters {
        self.ops
    }

    /// Per-round share assignments, oldest round first.
    pub fn labels_per_round(&self) -> &[Vec<(u64, usize)>] {
        &self.labels_per_round
    }

    pub fn handle(&mut self, msg: &Message, body: &[u8]) -> Result<Vec<Outgoing>> {
        match msg {
            Message::Header { .. } => {
                self.info = Some(HeaderInfo::from_message(self.role(), msg)?);
                Ok(Vec::new())
            }
            Message::Insert { points } => {
                if self.finished {
                    return Err(Error::InsertAfterConvergence);
                }
                let info = self.require_info(0)?;
                for p in points {
                    if p.coords.len() != info.dim {
                        return Err(perr(
                            self.role(),
                            0,
                            format!("inserted point {} has dimension {}", p.id, p.coords.len()),
                        ));
                    }
                    self.pending.push((p.id, p.coords.clone()));
                }
                Ok(Vec::new())
            }
            Message::Init { centers, keys } => {
                let info = self.require_info(0)?;
                if self.tracker.is_some() {
                    return Err(perr(self.role(), 0, "duplicate init"));
                }
                if centers.len() != info.k || centers.iter().any(|c| c.len() != info.dim) {
                    return Err(perr(self.role(), 0, "initial centers have the wrong shape"));
                }
                if keys.round != 1 {
                    return Err(perr(self.role(), 0, "initial keys must be for round 1"));
                }
                self.tracker = Some(CenterTracker::new(centers.clone(), *keys, &info));
                if info.max_iters == 0 {
                    // Labelling pass only: assign against the initial
                    // centers and finish without any masked traffic.
                    self.share.append(&mut self.pending);
                    let (labels, _, _) =
                        assign_clusters(&self.share, centers, &mut self.ops);
                    self.last_labels = labels.clone();
                    self.labels_per_round.push(labels);
                    return Ok(vec![self.done_message()]);
                }
                self.compute_round()
            }
            Message::Centroids { round, scaled_centers } => {
                let tracker = self
                    .tracker
                    .as_mut()
                    .ok_or_else(|| perr(PartyId::ComputeServer(self.index), *round, "centroids before init"))?;
                let (stop, _) = tracker.apply(
                    PartyId::ComputeServer(self.index),
                    *round,
                    scaled_centers,
                    body,
                    &mut self.ops,
                )?;
                if stop {
                    self.finished = true;
                    Ok(vec![self.done_message()])
                } else {
                    self.compute_round()
                }
            }
            other => {
                Err(perr(self.role(), 0, format!("unexpected message {}", other.kind())))
            }
        }
    }

    fn require_info(&self, round: u64) -> Result<HeaderInfo> {
        self.info.ok_or_else(|| perr(PartyId::ComputeServer(self.index), round, "no header yet"))
    }

    fn compute_round(&mut self) -> Result<Vec<Outgoing>> {
        self.share.append(&mut self.pending);
        let tracker = self.tracker.as_ref().expect("compute_round after init");
        let keys = tracker.chain.current();
        let (labels, sums, counts) =
            assign_clusters(&self.share, &tracker.centers, &mut self.ops);
        let (masked_sums, masked_counts) = mask_share(&sums, &counts, &keys, &mut self.ops);
        self.last_labels = labels.clone();
        self.labels_per_round.push(labels);
        Ok(vec![Outgoing {
            to: PartyId::Aggregator,
            message: Message::Shares {
                round: keys.round,
                server: self.index,
                masked_sums,
                masked_counts,
            },
        }])
    }

    fn done_message(&mut self) -> Outgoing {
        self.finished = true;
        let mut labels = self.last_labels.clone();
        labels.sort_unstable_by_key(|&(id, _)| id);
        let centers = self.tracker.as_ref().expect("done after init").centers.clone();
        Outgoing { to: PartyId::Owner, message: Message::Done { labels, centers } }
    }
}

/// The aggregator: waits for every server's masked share each round, folds
/// them, and broadcasts the scaled centroids — owner first, then servers in
/// index order. Holds no keys and no points.
pub struct AggregatorActor {
    info: Option<HeaderInfo>,
    buffer: Vec<MaskedShare>,
    next_round: u64,
    ops: OpCounters,
}

impl AggregatorActor {
    pub fn new() -> AggregatorActor {
        AggregatorActor { info: None, buffer: Vec::new(), next_round: 1, ops: OpCounters::default() }
    }

    pub fn ops(&self) -> OpCounters {
        self.ops
    }

    pub fn handle(&mut self, msg: &Message, _body: &[u8]) -> Result<Vec<Outgoing>> {
        let role = PartyId::Aggregator;
        match msg {
            Message::Header { .. } => {
                self.info = Some(HeaderInfo::from_message(role, msg)?);
                Ok(Vec::new())
            }
            Message::Shares { round, server, masked_sums, masked_counts } => {
                let info =
                    self.info.ok_or_else(|| perr(role, *round, "shares before header"))?;
                if *round != self.next_round {
                    return Err(perr(
                        role,
                        self.next_round,
                        format!("share from server{server} is for round {round}"),
                    ));
                }
                if *server == 0 || *server >= info.t {
                    return Err(perr(role, *round, format!("unknown server index {server}")));
                }
                self.buffer.push(MaskedShare {
                    server: *server,
                    round: *round,
                    masked_sums: masked_sums.clone(),
                    masked_counts: masked_counts.clone(),
                });
                if self.buffer.len() < info.t - 1 {
                    return Ok(Vec::new());
                }
                let shares = std::mem::take(&mut self.buffer);
                let (agg_round, scaled_centers) =
                    aggregate(&shares, info.k, info.dim, &mut self.ops)?;
                self.next_round += 1;
                let broadcast =
                    Message::Centroids { round: agg_round, scaled_centers };
                let mut out = vec![Outgoing { to: PartyId::Owner, message: broadcast.clone() }];
                for i in 1..info.t {
                    out.push(Outgoing {
                        to: PartyId::ComputeServer(i),
                        message: broadcast.clone(),
                    });
                }
                Ok(out)
            }
            other => Err(perr(role, self.next_round, format!("unexpected message {}", other.kind()))),
        }
    }
}

impl Default for AggregatorActor {
    fn default() -> Self {
        AggregatorActor::new()
    }
}

/// The data owner: perturbs, partitions, initializes, then follows the run
/// through a shadow tracker so it can answer convergence questions, route
/// insertions, and assemble the final result from the servers' reports.
pub struct OwnerActor {
    info: HeaderInfo,
    servers: usize,
    params: crate::params::RandomizationParams,
    bounds: BoundReport,
    ids: BTreeSet<u64>,
    tracker: CenterTracker,
    init_center_ids: Vec<u64>,
    transform_ops: OpCounters,
    ops: OpCounters,
    iterations: u64,
    stopping: bool,
    converged: bool,
    ell2: u32,
    insert_seed_base: u64,
    insert_count: u64,
    route_cursor: usize,
    done: BTreeMap<usize, (Vec<(u64, usize)>, Vec<Vec<f64>>)>,
}

impl OwnerActor {
    /// Derives parameters, perturbs and partitions the dataset, and returns
    /// the actor together with the setup envelopes in canonical order:
    /// header to the aggregator, then header/share/init per server.
    pub fn new(ds: &Dataset, cfg: &RunConfig) -> Result<(OwnerActor, Vec<Outgoing>)> {
        cfg.validate(ds)?;
        let servers = cfg.t - 1;

        let seeds = SubSeeds::derive(cfg.seed);

        let bounds = match cfg.weak_w {
            Some(w) => weak_bounds(w)?,
            None => strict_bounds(ds)?,
        };
        let params = sample_params(ds, &bounds, cfg.ell1, cfg.ell2, seeds.params)?;

        let mut transform_ops = OpCounters::default();
        let transformed = randomize(ds, &params, &mut transform_ops)?;
        let shares = partition(ds.len(), servers, cfg.partition, seeds.partition)?;
        let share_files = export_shares(&transformed, &shares);

        let init_center_ids = crate::oracle::sample_init_ids(ds, cfg.k, seeds.init_centers)?;
        let by_id: BTreeMap<u64, &[f64]> =
            transformed.iter().map(|p| (p.id, p.coords.as_slice())).collect();
        let init_centers: Vec<Vec<f64>> =
            init_center_ids.iter().map(|id| by_id[id].to_vec()).collect();

        let keys = initial_keys(cfg.ell1, seeds.keys)?;
        let info = HeaderInfo {
            k: cfg.k,
            t: cfg.t,
            dim: ds.dim(),
            tolerance: cfg.tolerance,
            max_iters: cfg.max_iters,
            ell1: cfg.ell1,
        };
        let header = Message::Header {
            k: info.k,
            t: info.t,
            dim: info.dim,
            tolerance: info.tolerance,
            max_iters: info.max_iters,
            ell1: info.ell1,
        };

        let mut out = vec![Outgoing { to: PartyId::Aggregator, message: header.clone() }];
        for file in share_files {
            let to = PartyId::ComputeServer(file.server + 1);
            out.push(Outgoing { to, message: header.clone() });
            out.push(Outgoing { to, message: Message::Insert { points: file.points } });
            out.push(Outgoing {
                to,
                message: Message::Init { centers: init_centers.clone(), keys },
            });
        }

        let owner = OwnerActor {
            info,
            servers,
            params,
            bounds,
            ids: ds.points().iter().map(|p| p.id).collect(),
            tracker: CenterTracker::new(init_centers, keys, &info),
            init_center_ids,
            transform_ops,
            ops: OpCounters::default(),
            iterations: 0,
            stopping: info.max_iters == 0,
            converged: false,
            ell2: cfg.ell2,
            insert_seed_base: seeds.inserts,
            insert_count: 0,
            route_cursor: 0,
            done: BTreeMap::new(),
        };
        Ok((owner, out))
    }

    pub fn init_center_ids(&self) -> &[u64] {
        &self.init_center_ids
    }

    pub fn bounds(&self) -> &BoundReport {
        &self.bounds
    }

    pub fn transform_ops(&self) -> OpCounters {
        self.transform_ops
    }

    pub fn ops(&self) -> OpCounters {
        self.ops
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    /// True once the stopping rule has fired (or `max_iters` was 0).
    pub fn stopping(&self) -> bool {
        self.stopping
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Mirrors a centroid broadcast through the shadow tracker. Returns
    /// whether the run stops after this round.
    pub fn on_centroids(&mut self, msg: &Message, body: &[u8]) -> Result<bool> {
        match msg {
            Message::Centroids { round, scaled_centers } => {
                let (stop, by_convergence) = self.tracker.apply(
                    PartyId::Owner,
                    *round,
                    scaled_centers,
                    body,
                    &mut self.ops,
                )?;
                self.iterations = *round;
                self.stopping = stop;
                self.converged = by_convergence;
                Ok(stop)
            }
            other => Err(perr(PartyId::Owner, 0, format!("expected centroids, got {}", other.kind()))),
        }
    }

    /// Perturbs late-arriving points with fresh noise and routes them
    /// round-robin across the servers. The points join the next assignment.
    pub fn prepare_insert(&mut self, points: &[Point]) -> Result<Vec<Outgoing>> {
        if self.stopping {
            return Err(Error::InsertAfterConvergence);
        }
        if points.is_empty() {
            return Ok(Vec::new());
        }
        for p in points {
            if p.coords.len() != self.info.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.info.dim,
                    got: p.coords.len(),
                });
            }
            if !self.ids.insert(p.id) {
                return Err(Error::DuplicateId(p.id));
            }
        }
        let seed = self.insert_seed_base.wrapping_add(self.insert_count);
        self.insert_count += 1;
        let epsilons =
            sample_fresh_epsilons(points.len(), self.params.eps_max, self.ell2, seed);
        let transformed =
            randomize_incremental(points, &epsilons, &self.params, &mut self.transform_ops)?;

        let mut per_server: BTreeMap<usize, Vec<crate::transform::TransformedPoint>> =
            BTreeMap::new();
        for p in transformed {
            let server = 1 + (self.route_cursor % self.servers);
            self.route_cursor += 1;
            per_server.entry(server).or_default().push(p);
        }
        Ok(per_server
            .into_iter()
            .map(|(server, points)| Outgoing {
                to: PartyId::ComputeServer(server),
                message: Message::Insert { points },
            })
            .collect())
    }

    /// Records one server's final report.
    pub fn on_done(&mut self, from: PartyId, msg: &Message) -> Result<()> {
        let index = match from {
            PartyId::ComputeServer(i) if i >= 1 && i <= self.servers => i,
            other => {
                return Err(perr(PartyId::Owner, self.iterations, format!("done from {other}")))
            }
        };
        match msg {
            Message::Done { labels, centers } => {
                if self.done.insert(index, (labels.clone(), centers.clone())).is_some() {
                    return Err(perr(
                        PartyId::Owner,
                        self.iterations,
                        format!("duplicate done from server{index}"),
                    ));
                }
                Ok(())
            }
            other => Err(perr(
                PartyId::Owner,
                self.iterations,
                format!("expected done, got {}", other.kind()),
            )),
        }
    }

    pub fn all_done(&self) -> bool {
        self.done.len() == self.servers
    }

    /// Merges the servers' reports into the run result: the label map over
    /// every id, the final transformed-space centers (cross-checked across
    /// servers and against the shadow tracker), and the owner's
    /// approximately-deperturbed centers.
    pub fn finish(&self) -> Result<(ClusterAssignment, CentroidSet, Vec<Vec<f64>>)> {
        let role = PartyId::Owner;
        if !self.all_done() {
            return Err(perr(role, self.iterations, "not all servers reported"));
        }
        let mut merged: Vec<(u64, usize)> = Vec::new();
        for (server, (labels, centers)) in &self.done {
            if centers != &self.tracker.centers {
                return Err(perr(
                    role,
                    self.iterations,
                    format!("server{server} finished with different centers"),
                ));
            }
            merged.extend_from_slice(labels);
        }
        for (id, _) in &merged {
            if !self.ids.contains(id) {
                return Err(perr(role, self.iterations, format!("label for unknown id {id}")));
            }
        }
        let total = merged.len();
        let labels = ClusterAssignment::from_pairs(merged);
        if total != self.ids.len() || labels.len() != self.ids.len() {
            return Err(perr(
                role,
                self.iterations,
                format!("{} labels for {} points", total, self.ids.len()),
            ));
        }
        let centers = CentroidSet::new(self.tracker.centers.clone())?;
        let approx = self.approx_original_centers();
        Ok((labels, centers, approx))
    }

    /// Undoes the affine part of the perturbation on the final centers:
    /// `(c - shift) / scale` per dimension. The per-point noises average
    /// into a relative error of order `eps_max / scale`, which is why these
    /// are approximate.
    fn approx_original_centers(&self) -> Vec<Vec<f64>> {
        self.tracker
            .centers
            .iter()
            .map(|c| {
                c.iter()
                    .enumerate()
                    .map(|(j, v)| (v - self.params.shift(j)) / self.params.scale(j))
                    .collect()
            })
            .collect()
    }
}
