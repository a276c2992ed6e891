use crate::protocol::PartyId;

/// Errors surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two vectors that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A coordinate was NaN or infinite where a finite value is required.
    #[error("non-finite coordinate at point id {id}, dimension {dim}")]
    NonFinite { id: u64, dim: usize },

    /// The input dataset has no rows.
    #[error("dataset is empty")]
    EmptyDataset,

    /// Point ids must be unique within a dataset.
    #[error("duplicate point id {0}")]
    DuplicateId(u64),

    /// CSV parsing failed; `row` is 1-based and counts the header if present.
    #[error("csv: row {row}: {msg}")]
    Csv { row: usize, msg: String },

    /// Strict bounds need at least two distinct points.
    #[error("no admissible triples: all points are identical")]
    NoAdmissibleTriples,

    /// The derived noise ceiling was not positive.
    #[error("dataset admits no strict noise bound")]
    NoStrictNoiseBound,

    /// The requested scale magnitude cannot fit above the derived lower bound.
    #[error("ell1 too small for bound: need scales above {r_lower}, but 2^{ell1} = {limit}")]
    Ell1TooSmall { r_lower: f64, ell1: u32, limit: f64 },

    /// A parameter failed basic validation (message explains which).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Protocol-level failure, tagged with the role and round where it arose.
    #[error("protocol error at {role} round {round}: {msg}")]
    Protocol { role: PartyId, round: u64, msg: String },

    /// Transport-level failure (framing, socket, handshake), same tagging.
    #[error("transport error at {role} round {round}: {source}")]
    Transport {
        role: PartyId,
        round: u64,
        #[source]
        source: std::io::Error,
    },

    /// Late mutation: points cannot be inserted into a finished run.
    #[error("run already converged; cannot insert points")]
    InsertAfterConvergence,

    /// A divergence bound was evaluated outside its validity region.
    #[error("divergence bound invalid: {0}")]
    DivergenceBound(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
