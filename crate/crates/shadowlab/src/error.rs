//! Crate-wide error type.
//!
//! Every failure mode an operation can report is a named variant here, so
//! callers (and the CLI exit-code mapping) can match on the *kind* of
//! failure rather than parsing strings.

use thiserror::Error;

/// Errors reported by laboratory operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A system catalog entry or operation argument is malformed.
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    /// A shift word ran out of symbols before the requested iterate.
    #[error("horizon exhausted: {0}")]
    HorizonExhausted(String),

    /// An estimate was requested at a horizon too small to say anything.
    #[error("horizon too small: {0}")]
    HorizonTooSmall(String),

    /// The input pseudo-orbit does not classify as ergodic at the tolerance
    /// the construction needs.
    #[error("input is not an ergodic pseudo-orbit: {0}")]
    NotErgodicInput(String),

    /// A concatenation schedule asked for a longer block than the supplied
    /// family provides.
    #[error("blocks too short: {0}")]
    BlocksTooShort(String),

    /// A backward construction needed a preimage the system cannot produce.
    #[error("no preimage: {0}")]
    NoPreimage(String),

    /// The adversary schedule found no return time in the admissible window.
    #[error("return time not found: {0}")]
    ReturnTimeNotFound(String),

    /// The chain graph resolution is too coarse for the requested delta.
    #[error("net too coarse: {0}")]
    NetTooCoarse(String),

    /// A ball specification contains no net point.
    #[error("empty ball: {0}")]
    EmptyBall(String),

    /// A verifier was started with no usable candidate.
    #[error("empty candidate set: {0}")]
    EmptyCandidateSet(String),

    /// An almost-specification segment is shorter than the mistake function
    /// allows.
    #[error("segment too short: {0}")]
    SegmentTooShort(String),

    /// A structure operation only defined for finite systems got something
    /// else.
    #[error("system is not finite: {0}")]
    SystemNotFinite(String),

    /// An experiment configuration failed validation.
    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    /// Reading or writing experiment artifacts failed.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization of configs or reports failed.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
