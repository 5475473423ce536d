use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(&'static str),
    #[error("{0} is not an NTT-friendly prime for this ring degree")]
    InvalidPrime(u64),
    #[error("parameter set exceeds the 128-bit security bound: log2(PQ) = {log_pq:.1} > {bound} for N = {degree}")]
    Insecure { degree: usize, log_pq: f64, bound: u32 },
    #[error("polynomial is in the wrong domain for this operation")]
    Domain,
    #[error("operands live on different RNS bases")]
    Basis,
    #[error("operands disagree on level or scale")]
    Alignment,
    #[error("multiplicative depth exhausted")]
    DepthExhausted,
    #[error("missing or wrong evaluation key: {0}")]
    Key(&'static str),
    #[error("{given} values exceed the {slots}-slot capacity")]
    Capacity { given: usize, slots: usize },
    #[error("weights must be finite")]
    NonFinite,
    #[error("shape mismatch: {0}")]
    Shape(&'static str),
    #[error("reduction width {0} is not a power of two within the slot count")]
    Width(usize),
    #[error("hoisting plan infeasible: ciphertext size exceeds memory budget")]
    Infeasible,
    #[error("selection rule precondition violated: {0}")]
    Rule(&'static str),
    #[error("dataset is empty")]
    EmptyData,
    #[error("malformed ciphertext encoding: {0}")]
    Decode(&'static str),
}
