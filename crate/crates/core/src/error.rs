use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid triple (i={i}, j={j}, L={len}): {reason}")]
    InvalidTriple {
        i: usize,
        j: usize,
        len: usize,
        reason: &'static str,
    },

    #[error("word of length {word_len} is shorter than the window length {window}")]
    WordTooShort { word_len: usize, window: usize },

    #[error("symbol {symbol} is not allowed here (expected one of {allowed})")]
    BadSymbol { symbol: u8, allowed: &'static str },

    #[error("{what}: estimated size {estimate:.3e} exceeds cap {cap:.3e}")]
    CapExceeded {
        what: &'static str,
        estimate: f64,
        cap: f64,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("schedule invalid: {0}")]
    ScheduleInvalid(String),

    #[error("schedule infeasible within limits: {0}")]
    Infeasible(String),

    #[error("graph is empty")]
    EmptyGraph,

    #[error("graph is not primitive: period {period} (witness cycle through node {witness})")]
    NotPrimitive { period: usize, witness: usize },

    #[error("no sign change for the pressure difference: D({lo})={d_lo:.6e}, D({hi})={d_hi:.6e}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        d_lo: f64,
        d_hi: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("fiber configuration error: {0}")]
    FiberConfig(String),

    #[error("lemma check failed: {0}")]
    LemmaViolation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}
