use thiserror::Error;

/// Errors produced by construction, validation, and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("attribute code {code} not in declared alphabet")]
    UnknownAttribute { code: u8 },

    #[error("treatment code {code} not in declared alphabet")]
    UnknownTreatment { code: u8 },

    #[error("length mismatch: {what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),

    #[error("non-binary alphabet: {0}")]
    NonBinaryAlphabet(&'static str),

    #[error("empty cell: stratum {stratum} has no units with the requested exposure")]
    EmptyCell { stratum: u8 },

    #[error("no stratum has at least 2 units in both exposure cells")]
    NoEstimableStratum,

    #[error("undefined test statistic: no focal unit carries exposure {which}")]
    UndefinedStatistic { which: String },

    #[error("balance multiplier must exceed 1, got {0}")]
    InvalidEta(f64),

    #[error("linear program is {0}")]
    LpStatus(&'static str),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(&'static str),

    #[error("bad quadruple spec '{0}': expected a_sum:w_sum:aw_sum:own")]
    BadQuadSpec(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
