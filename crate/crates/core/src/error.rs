use thiserror::Error;

/// Errors raised by sketching, auditing, wire decoding and simulation.
///
/// Every variant carries a stable kebab-case code (see [`Error::code`]) that
/// the CLI prints and tests match on.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty-sample: cannot take quantiles of an empty sample")]
    EmptySample,
    #[error("level-out-of-range: level {0} is not in (0, 1)")]
    LevelOutOfRange(f64),
    #[error("weights-not-normalized: weights sum to {0}")]
    WeightsNotNormalized(f64),
    #[error("degenerate-weights: weights must be nonnegative with a positive sum")]
    DegenerateWeights,
    #[error("grid-mismatch: {0}")]
    GridMismatch(String),
    #[error("unsupported-p: p = {0}, only 1 and 2 are supported")]
    UnsupportedP(u32),
    #[error("invalid-grid: {0}")]
    InvalidGrid(String),
    #[error("invalid-sketch: {0}")]
    InvalidSketch(String),
    #[error("invalid-step-cdf: {0}")]
    InvalidStepCdf(String),
    #[error("k-too-small: k = {0}, at least 2 levels are needed")]
    KTooSmall(usize),
    #[error("two-groups-only: got {0} groups")]
    TwoGroupsOnly(usize),
    #[error("too-few-groups: got {0} groups, need at least 2")]
    TooFewGroups(usize),
    #[error("empty-group: group {0:?} has no scores")]
    EmptyGroup(String),
    #[error("empty-silo: silo {0:?} has no scores")]
    EmptySilo(String),
    #[error("no-messages: the server needs at least one silo message")]
    NoMessages,
    #[error("unknown-group-weights: group {0:?} has zero total count")]
    UnknownGroupWeights(String),
    #[error("duplicate-silo: silo id {0:?} appears more than once")]
    DuplicateSilo(String),
    #[error("duplicate-group: group {0:?} appears more than once in a message")]
    DuplicateGroup(String),
    #[error("malformed-message: {0}")]
    MalformedMessage(String),
    #[error("unsupported-version: wire version {0:?}")]
    UnsupportedVersion(char),
    #[error("delta-out-of-range: delta = {0} is not in (0, 1)")]
    DeltaOutOfRange(f64),
    #[error("invalid-bound-input: {0}")]
    InvalidBoundInput(String),
    #[error("margin-mismatch: {0}")]
    MarginMismatch(String),
    #[error("degenerate-correlation: an argument has zero variance")]
    DegenerateCorrelation,
    #[error("length-mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid-parameter: {0}")]
    InvalidParameter(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("malformed-input: {0}")]
    MalformedInput(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptySample => "empty-sample",
            Error::LevelOutOfRange(_) => "level-out-of-range",
            Error::WeightsNotNormalized(_) => "weights-not-normalized",
            Error::DegenerateWeights => "degenerate-weights",
            Error::GridMismatch(_) => "grid-mismatch",
            Error::UnsupportedP(_) => "unsupported-p",
            Error::InvalidGrid(_) => "invalid-grid",
            Error::InvalidSketch(_) => "invalid-sketch",
            Error::InvalidStepCdf(_) => "invalid-step-cdf",
            Error::KTooSmall(_) => "k-too-small",
            Error::TwoGroupsOnly(_) => "two-groups-only",
            Error::TooFewGroups(_) => "too-few-groups",
            Error::EmptyGroup(_) => "empty-group",
            Error::EmptySilo(_) => "empty-silo",
            Error::NoMessages => "no-messages",
            Error::UnknownGroupWeights(_) => "unknown-group-weights",
            Error::DuplicateSilo(_) => "duplicate-silo",
            Error::DuplicateGroup(_) => "duplicate-group",
            Error::MalformedMessage(_) => "malformed-message",
            Error::UnsupportedVersion(_) => "unsupported-version",
            Error::DeltaOutOfRange(_) => "delta-out-of-range",
            Error::InvalidBoundInput(_) => "invalid-bound-input",
            Error::MarginMismatch(_) => "margin-mismatch",
            Error::DegenerateCorrelation => "degenerate-correlation",
            Error::LengthMismatch(_) => "length-mismatch",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::Dataset(_) => "dataset",
            Error::MalformedInput(_) => "malformed-input",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code: 3 for input that could not be read or decoded,
    /// 2 for everything that decoded but failed validation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MalformedMessage(_)
            | Error::UnsupportedVersion(_)
            | Error::MalformedInput(_)
            | Error::Io(_) => 3,
            _ => 2,
        }
    }
}
