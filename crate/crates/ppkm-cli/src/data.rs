//! Dataset loading and the non-negativity preprocessing shared by `run`
//! and `oracle`.
//!
//! Both subcommands translate the input into the non-negative orthant
//! before doing anything else — the strict parameter bounds are derived
//! for non-negative coordinates — and map reported centers back to input
//! coordinates by re-adding the offset. Applying the identical rule on
//! both sides is what makes their labels comparable bit for bit.

use std::path::{Path, PathBuf};

use ppkm::dataset::{self, CsvSchema, Dataset};

use crate::CmdError;

/// How to read the input CSV.
#[derive(clap::Args, Clone, Debug)]
pub(crate) struct DataArgs {
    /// Input CSV: one row per point, one numeric column per attribute
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    /// Skip the first CSV row as a header
    #[arg(long)]
    pub has_header: bool,
    /// Zero-based index of a column holding integer point ids
    /// (default: ids are the row indices)
    #[arg(long, value_name = "COL")]
    pub id_column: Option<usize>,
}

/// A dataset translated into the non-negative orthant, together with the
/// per-dimension offset that maps results back to input coordinates.
pub(crate) struct PreparedData {
    pub dataset: Dataset,
    pub offset: Vec<f64>,
}

pub(crate) fn load(path: &Path, has_header: bool, id_column: Option<usize>) -> Result<PreparedData, CmdError> {
    let schema = CsvSchema { has_header, id_column };
    let raw = dataset::load_csv(path, schema)?;
    let (dataset, offset) = dataset::translate_non_negative(&raw)?;
    Ok(PreparedData { dataset, offset })
}

/// Expresses translated-space centers in input coordinates.
pub(crate) fn add_offset(centers: &[Vec<f64>], offset: &[f64]) -> Vec<Vec<f64>> {
    centers
        .iter()
        .map(|c| c.iter().zip(offset).map(|(v, o)| v + o).collect())
        .collect()
}
