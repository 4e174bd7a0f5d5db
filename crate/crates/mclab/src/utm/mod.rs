//! The toy description machine and its complexity oracle.
//!
//! Programs are bit strings executed MSB-first: a 3-bit opcode followed by
//! Elias-gamma operands. The machine only ever appends to an output buffer;
//! eight opcodes cover literal emission (so K(x) ≤ |x| + 3 always), run and
//! alternation compression, suffix repetition, and emission of the i-th
//! member of a distribution's high-probability set (the constructive witness
//! for threshold arguments).
//!
//! `build_oracle` enumerates every program up to a length bound, runs each
//! under a step cap, and tabulates for every produced string the length of
//! its first (shortest, then lexicographically least) producing program.
//! That table is the ground truth K_T every other module checks against.

mod code;
mod index;
mod machine;
mod oracle;

pub use code::{gamma_encode, gamma_len, Opcode, Program};
pub use index::{
    high_set, high_set_member, high_size_within_counting_bound, index_bits_bound,
    index_description, HighThreshold, IndexWitness,
};
pub use machine::{run_program, InvalidKind, QueryRegistry, RunError, UtmConfig, RUN_HARD_CAP_BITS};
pub use oracle::{
    build_oracle, export_csv, load_oracle, save_oracle, KBound, OracleEntry, OracleTable,
    DEFAULT_EXECUTION_BUDGET,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum UtmError {
    #[error("invalid machine config: {0}")]
    InvalidConfig(String),
    #[error("enumeration budget exhausted: {executed} of {budget} executions")]
    BudgetExceeded { executed: u64, budget: u64 },
    #[error("no registered query named {0:?}")]
    UnknownQuery(String),
    #[error("query distribution is over {dist} bits, not {requested}")]
    WidthMismatch { dist: u32, requested: u32 },
    #[error("index {i} outside the high set (size {high_size})")]
    IndexOutOfRange { i: u64, high_size: u64 },
    #[error("query {0:?} must be an exact-mode distribution")]
    QueryNotExact(String),
    #[error("complexity query at s = {s} exceeds the table bound L_max = {l_max}")]
    QueryTooDeep { s: u32, l_max: u32 },
    #[error("oracle file corrupt: {0}")]
    CorruptTable(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for UtmError {
    fn from(e: std::io::Error) -> Self {
        UtmError::Io(e.to_string())
    }
}
