//! `oracle`: the plaintext reference clustering.
//!
//! Seeded with the same master seed, it picks the same initial centers as
//! a protocol run — so its labels are the ground truth a `run` under the
//! same flags must reproduce exactly.

use std::path::PathBuf;

use serde::Serialize;

use ppkm::dataset::ClusterAssignment;
use ppkm::lloyd::OpCounters;
use ppkm::oracle::{lloyd, sample_init_ids, within_cluster_ss};
use ppkm::protocol::SubSeeds;

use crate::data::{self, DataArgs};
use crate::run::SCHEMA_VERSION;
use crate::{resolve_seed, to_json_text, CmdError, CmdResult};

#[derive(clap::Args, Debug)]
pub(crate) struct OracleArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of clusters
    #[arg(long)]
    k: usize,
    /// Master seed (fallback: PPKM_SEED, then 0); picks the same initial
    /// centers as `run` with that seed
    #[arg(long)]
    seed: Option<u64>,
    /// Relative center-movement convergence tolerance
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    /// Iteration budget; 0 runs a single labelling pass
    #[arg(long, default_value_t = 100)]
    max_iters: u64,
    /// Also write labels.csv and centers.json into this directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct OracleDoc {
    schema_version: u32,
    k: usize,
    seed: u64,
    init_center_ids: Vec<u64>,
    iterations: u64,
    converged: bool,
    within_cluster_ss: f64,
    ops: OpCounters,
    /// Subtracted per dimension before clustering; `centers` already have
    /// it added back.
    translation_offset: Vec<f64>,
    /// Final centers in input coordinates.
    centers: Vec<Vec<f64>>,
    #[serde(flatten)]
    labels: ClusterAssignment,
}

pub(crate) fn cmd_oracle(args: OracleArgs) -> CmdResult {
    let path = args
        .data
        .data
        .clone()
        .ok_or_else(|| CmdError::Usage("--data is required".into()))?;
    let prepared = data::load(&path, args.data.has_header, args.data.id_column)?;
    let seed = resolve_seed(args.seed)?;

    let init_ids = sample_init_ids(&prepared.dataset, args.k, SubSeeds::derive(seed).init_centers)?;
    let result = lloyd(&prepared.dataset, args.k, &init_ids, args.tolerance, args.max_iters)?;

    let pairs: Vec<(u64, Vec<f64>)> =
        prepared.dataset.points().iter().map(|p| (p.id, p.coords.clone())).collect();
    let wcss = within_cluster_ss(&pairs, &result.labels, &result.centers)?;

    let doc = OracleDoc {
        schema_version: SCHEMA_VERSION,
        k: args.k,
        seed,
        init_center_ids: init_ids,
        iterations: result.iterations,
        converged: result.converged,
        within_cluster_ss: wcss,
        ops: result.ops,
        translation_offset: prepared.offset.clone(),
        centers: data::add_offset(result.centers.centers(), &prepared.offset),
        labels: result.labels,
    };
    print!("{}", to_json_text(&doc)?);

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        doc.labels.write_csv(&dir.join("labels.csv"))?;
        let centers = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "centers": doc.centers,
        });
        std::fs::write(dir.join("centers.json"), to_json_text(&centers)?)?;
    }
    Ok(())
}
