//! `run`: execute the full multi-server protocol and write the artifacts.
//!
//! Settings resolve in three layers — explicit flags, then a `--config`
//! JSON file, then defaults — and the resolved form is embedded in
//! `report.json`, so every run can be replayed exactly from its own
//! report. Four files land in `--out`: `labels.csv`, `centers.json`,
//! `transcript.jsonl`, and `report.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use ppkm::dataset::Dataset;
use ppkm::oracle::{lloyd, sample_init_ids};
use ppkm::params::BoundReport;
use ppkm::protocol::{PartyCounters, PartyId, RunConfig, RunOutcome, SubSeeds, Transport};
use ppkm::transform::PartitionStrategy;

use crate::data::{self, DataArgs};
use crate::{resolve_seed, to_json_text, CmdError, CmdResult};

pub(crate) const SCHEMA_VERSION: u32 = 1;

/// Which rule derives the perturbation parameter bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub(crate) enum Mode {
    /// Scan the dataset for the exact order-preserving bounds.
    Strict,
    /// Assume coordinates lie in `(0, w)` and take the constant rule.
    Weak,
}

/// How points are dealt to the compute servers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub(crate) enum PartitionArg {
    RoundRobin,
    Contiguous,
    Shuffled,
}

impl PartitionArg {
    fn to_strategy(self) -> PartitionStrategy {
        match self {
            PartitionArg::RoundRobin => PartitionStrategy::RoundRobin,
            PartitionArg::Contiguous => PartitionStrategy::Contiguous,
            PartitionArg::Shuffled => PartitionStrategy::Shuffled,
        }
    }
}

/// Where the non-owner parties live.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub(crate) enum TransportKind {
    InProcess,
    Tcp,
}

#[derive(clap::Args, Debug)]
pub(crate) struct RunArgs {
    /// JSON settings file (the object report.json embeds under "config");
    /// explicit flags override its entries
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    /// Number of clusters
    #[arg(long)]
    k: Option<usize>,
    /// Total servers: compute servers plus one aggregator
    #[arg(long)]
    t: Option<usize>,
    /// Parameter bound rule [default: strict]
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Data bound for --mode weak: coordinates must lie in (0, w)
    #[arg(long)]
    w: Option<f64>,
    /// Bit length of scales, shifts and mask keys [default: 34]
    #[arg(long)]
    ell1: Option<u32>,
    /// Bit length (precision) of sampled noise [default: 32]
    #[arg(long)]
    ell2: Option<u32>,
    /// Master seed (fallback: PPKM_SEED, then 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Relative center-movement convergence tolerance [default: 1e-9]
    #[arg(long)]
    tolerance: Option<f64>,
    /// Iteration budget; 0 runs a single labelling pass [default: 100]
    #[arg(long)]
    max_iters: Option<u64>,
    /// How points are dealt to compute servers [default: round-robin]
    #[arg(long, value_enum)]
    partition: Option<PartitionArg>,
    /// Where the servers live [default: in-process]
    #[arg(long, value_enum)]
    transport: Option<TransportKind>,
    /// host:port of each remote party for --transport tcp: compute
    /// servers in index order, aggregator last (t addresses total)
    #[arg(long, value_name = "ADDR")]
    connect: Vec<String>,
    /// Directory for labels.csv, centers.json, transcript.jsonl, report.json
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also run the plaintext oracle and report the equivalence verdict
    #[arg(long)]
    with_oracle: bool,
}

/// The resolved settings of a run. Written into report.json under
/// `config` and accepted back via `--config` for exact replays.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RunSettings {
    pub data: PathBuf,
    pub has_header: bool,
    pub id_column: Option<usize>,
    pub k: usize,
    pub t: usize,
    pub mode: Mode,
    pub w: Option<f64>,
    pub ell1: u32,
    pub ell2: u32,
    pub seed: u64,
    pub tolerance: f64,
    pub max_iters: u64,
    pub partition: PartitionArg,
    pub transport: TransportKind,
    pub connect: Vec<String>,
    pub out: PathBuf,
}

/// `RunSettings` with every field optional: the `--config` file shape.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileSettings {
    data: Option<PathBuf>,
    has_header: Option<bool>,
    id_column: Option<usize>,
    k: Option<usize>,
    t: Option<usize>,
    mode: Option<Mode>,
    w: Option<f64>,
    ell1: Option<u32>,
    ell2: Option<u32>,
    seed: Option<u64>,
    tolerance: Option<f64>,
    max_iters: Option<u64>,
    partition: Option<PartitionArg>,
    transport: Option<TransportKind>,
    connect: Option<Vec<String>>,
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunSettings, CmdError> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                serde_json::from_str::<FileSettings>(&text)
                    .map_err(|e| CmdError::Usage(format!("{}: {e}", path.display())))?
            }
            None => FileSettings::default(),
        };
        let require =
            |name: &str| CmdError::Usage(format!("--{name} is required (flag or config file)"));
        let data = self.data.data.clone().or(file.data).ok_or_else(|| require("data"))?;
        let k = self.k.or(file.k).ok_or_else(|| require("k"))?;
        let out = self.out.clone().or(file.out).ok_or_else(|| require("out"))?;
        let t = self.t.or(file.t).unwrap_or(3);

        let mode = self.mode.or(file.mode).unwrap_or(Mode::Strict);
        let w = self.w.or(file.w);
        match (mode, w) {
            (Mode::Weak, None) => {
                return Err(CmdError::Usage("--mode weak needs --w".into()));
            }
            (Mode::Strict, Some(_)) => {
                return Err(CmdError::Usage("--w only applies with --mode weak".into()));
            }
            _ => {}
        }

        let transport = self.transport.or(file.transport).unwrap_or(TransportKind::InProcess);
        let connect = if self.connect.is_empty() {
            file.connect.unwrap_or_default()
        } else {
            self.connect.clone()
        };
        match transport {
            TransportKind::InProcess if !connect.is_empty() => {
                return Err(CmdError::Usage("--connect only applies with --transport tcp".into()));
            }
            TransportKind::Tcp if connect.len() != t => {
                return Err(CmdError::Usage(format!(
                    "--transport tcp needs exactly t = {t} --connect addresses \
                     (compute servers in index order, aggregator last), got {}",
                    connect.len()
                )));
            }
            _ => {}
        }

        Ok(RunSettings {
            data,
            has_header: self.data.has_header || file.has_header.unwrap_or(false),
            id_column: self.data.id_column.or(file.id_column),
            k,
            t,
            mode,
            w,
            ell1: self.ell1.or(file.ell1).unwrap_or(34),
            ell2: self.ell2.or(file.ell2).unwrap_or(32),
            seed: resolve_seed(self.seed.or(file.seed))?,
            tolerance: self.tolerance.or(file.tolerance).unwrap_or(1e-9),
            max_iters: self.max_iters.or(file.max_iters).unwrap_or(100),
            partition: self.partition.or(file.partition).unwrap_or(PartitionArg::RoundRobin),
            transport,
            connect,
            out,
        })
    }
}

impl RunSettings {
    fn protocol_config(&self) -> RunConfig {
        RunConfig {
            k: self.k,
            t: self.t,
            tolerance: self.tolerance,
            max_iters: self.max_iters,
            seed: self.seed,
            ell1: self.ell1,
            ell2: self.ell2,
            weak_w: match self.mode {
                Mode::Weak => self.w,
                Mode::Strict => None,
            },
            partition: self.partition.to_strategy(),
            transport: match self.transport {
                TransportKind::InProcess => Transport::InProcess,
                TransportKind::Tcp => {
                    let (compute, aggregator) = self.connect.split_at(self.connect.len() - 1);
                    Transport::Tcp {
                        compute: compute.to_vec(),
                        aggregator: aggregator[0].clone(),
                    }
                }
            },
        }
    }
}

#[derive(Serialize)]
struct CentersDoc {
    schema_version: u32,
    /// Converged centers as the servers see them (perturbed space).
    transformed: Vec<Vec<f64>>,
    /// The owner's de-perturbed estimate, in input coordinates.
    approx_input_space: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct DatasetSummary {
    points: usize,
    dim: usize,
    /// Subtracted per dimension before the run to reach the non-negative
    /// orthant; reported centers already have it added back.
    translation_offset: Vec<f64>,
}

#[derive(Serialize)]
struct OracleComparison {
    assignments_match: bool,
    iterations_equal: bool,
    /// Assignments equal at every round, not just the last. `null` on TCP
    /// runs: remote servers keep their per-round labels to themselves.
    rounds_match: Option<bool>,
    oracle_iterations: u64,
    oracle_converged: bool,
}

#[derive(Serialize)]
struct Report {
    schema_version: u32,
    config: RunSettings,
    dataset: DatasetSummary,
    bounds: BoundReport,
    init_center_ids: Vec<u64>,
    iterations: u64,
    converged: bool,
    empty_cluster_rounds: Vec<(u64, Vec<usize>)>,
    counters: BTreeMap<PartyId, PartyCounters>,
    oracle: Option<OracleComparison>,
}

fn compare_with_oracle(
    ds: &Dataset,
    settings: &RunSettings,
    outcome: &RunOutcome,
) -> Result<OracleComparison, CmdError> {
    let init_seed = SubSeeds::derive(settings.seed).init_centers;
    let init_ids = sample_init_ids(ds, settings.k, init_seed)?;
    let plain = lloyd(ds, settings.k, &init_ids, settings.tolerance, settings.max_iters)?;
    let rounds_match = match settings.transport {
        TransportKind::Tcp => None,
        TransportKind::InProcess => Some(
            plain.round_labels.len() == outcome.transcript.round_assignments.len()
                && plain
                    .round_labels
                    .iter()
                    .zip(&outcome.transcript.round_assignments)
                    .all(|(a, b)| a == b),
        ),
    };
    Ok(OracleComparison {
        assignments_match: plain.labels == outcome.labels,
        iterations_equal: plain.iterations == outcome.iterations,
        rounds_match,
        oracle_iterations: plain.iterations,
        oracle_converged: plain.converged,
    })
}

pub(crate) fn cmd_run(args: RunArgs) -> CmdResult {
    let with_oracle = args.with_oracle;
    let settings = args.resolve()?;
    let prepared = data::load(&settings.data, settings.has_header, settings.id_column)?;
    let outcome = ppkm::protocol::run(&prepared.dataset, &settings.protocol_config())?;
    let oracle = with_oracle
        .then(|| compare_with_oracle(&prepared.dataset, &settings, &outcome))
        .transpose()?;

    fs::create_dir_all(&settings.out)?;
    outcome.labels.write_csv(&settings.out.join("labels.csv"))?;

    let centers = CentersDoc {
        schema_version: SCHEMA_VERSION,
        transformed: outcome.centers.centers().to_vec(),
        approx_input_space: data::add_offset(&outcome.approx_original_centers, &prepared.offset),
    };
    fs::write(settings.out.join("centers.json"), to_json_text(&centers)?)?;
    fs::write(settings.out.join("transcript.jsonl"), outcome.transcript.to_jsonl()?)?;

    let report = Report {
        schema_version: SCHEMA_VERSION,
        dataset: DatasetSummary {
            points: prepared.dataset.len(),
            dim: prepared.dataset.dim(),
            translation_offset: prepared.offset,
        },
        bounds: outcome.bounds,
        init_center_ids: outcome.init_center_ids,
        iterations: outcome.iterations,
        converged: outcome.converged,
        empty_cluster_rounds: outcome.transcript.empty_cluster_rounds,
        counters: outcome.transcript.counters,
        oracle,
        config: settings,
    };
    fs::write(report.config.out.join("report.json"), to_json_text(&report)?)?;

    println!(
        "{} points in {} clusters: converged={} after {} iterations; artifacts in {}",
        report.dataset.points,
        report.config.k,
        report.converged,
        report.iterations,
        report.config.out.display()
    );
    Ok(())
}
