use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("invalid model parameter: {0}")]
    InvalidParams(String),

    #[error("event {index} at ({lon}, {lat}) lies outside the region")]
    OutsideRegion { index: usize, lon: f64, lat: f64 },

    #[error("event {index} has invalid time {t}")]
    InvalidTime { index: usize, t: f64 },

    #[error("event times must be strictly increasing: event {index} at t={t} does not follow t={prev}")]
    NonIncreasing { index: usize, t: f64, prev: f64 },

    #[error("event indices must be contiguous from 1: found {found} at position {position}")]
    BadIndex { position: usize, found: usize },

    #[error("catalog is empty")]
    EmptyCatalog,

    #[error("cannot propagate backwards in time from {from} to {to}")]
    TimeReversal { from: f64, to: f64 },

    #[error("an active cluster requires a mother event")]
    MissingMother,

    #[error("inconsistent labeled path at event {index}: {reason}")]
    InconsistentPath { index: usize, reason: &'static str },

    #[error("path has {path} labels but the catalog has {catalog} events")]
    PathLength { path: usize, catalog: usize },

    #[error("target {0} is not frozen at this event; the arriving event's membership is created by the jump itself")]
    UnfrozenTarget(String),

    #[error("target {target} must start at t={expected}, but the filter is at t={actual}")]
    StartMismatch {
        target: String,
        expected: f64,
        actual: f64,
    },

    #[error("filter state mismatch: {0}")]
    StateMismatch(String),

    #[error("catalog has {n} events; exhaustive enumeration is limited to {max}")]
    TooManyEvents { n: usize, max: usize },

    #[error("offspring location sampling failed for mother {mother} after {attempts} attempts")]
    SamplerExhausted { mother: usize, attempts: usize },

    #[error("objective is not finite at the starting point")]
    NonFiniteStart,

    #[error("no restart produced a finite likelihood")]
    FitFailed,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
