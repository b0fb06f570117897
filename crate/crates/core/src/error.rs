use std::io;

use thiserror::Error;

use crate::circuit::StructureViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample has {got} values but the circuit has {expected} variables")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("variable {var}: category {value} out of range (cardinality {cardinality})")]
    CategoryOutOfRange { var: usize, value: u32, cardinality: u32 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("row {row} has zero likelihood under the circuit")]
    ZeroLikelihood { row: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("flow table does not match circuit: {0}")]
    FlowTableMismatch(String),

    #[error("flow-sum hypothesis violated on {} row(s), first row {}", rows.len(), rows[0])]
    BoundInapplicable { rows: Vec<usize> },

    #[error("circuit failed validation with {} violation(s); first: {}", .0.len(), .0[0])]
    InvalidCircuit(Vec<StructureViolation>),

    #[error("cycle detected at unit {0}")]
    Cycle(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("data error at row {row}, column {col}: {msg}")]
    Data { row: usize, col: usize, msg: String },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("bad magic bytes: not a {0} file")]
    Magic(&'static str),

    #[error("checksum mismatch: file is corrupt or truncated")]
    Checksum,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
