use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("width {width} out of range 1..={max}")]
    WidthOutOfRange { width: u32, max: u32 },

    #[error("width mismatch: expected {expected} bits, got a {actual}-bit value")]
    WidthMismatch { expected: u32, actual: u32 },

    #[error("duplicate word {0} (an instance is a set)")]
    DuplicateWord(String),

    #[error("empty instance")]
    EmptyInstance,

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what}: gave up after {retries} retries")]
    RetryBudgetExhausted { what: &'static str, retries: u32 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("packed capacity exceeded: {needed} bits needed, {available} available")]
    Capacity { needed: u64, available: u64 },

    #[error("instance too large for {what}: n = {n}, limit {limit}")]
    TooLarge {
        what: &'static str,
        n: usize,
        limit: usize,
    },
}
