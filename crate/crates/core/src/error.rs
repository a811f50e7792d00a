use thiserror::Error;

use crate::topology::Coord;

/// Invalid design-time or experiment parameters.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("address map overflow: {needed:#x} bytes needed, {available:#x} addressable")]
    AddressOverflow { needed: u128, available: u128 },
    #[error("region at {base:#x} belongs to {coord}, which is not a slave endpoint of the mesh")]
    UnownedRegion { base: u64, coord: Coord },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AxiError {
    #[error("base address {address:#x} is not aligned to the {beat_bytes}-byte beat")]
    Misaligned { address: u64, beat_bytes: u32 },
    #[error("transfer of zero bytes")]
    Empty,
}

/// Problems reading or validating a trace file.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    /// `index` counts records from 1.
    #[error("record {index}: {reason}")]
    Invalid { index: usize, reason: String },
}

/// Internal invariant breach inside the cycle engine. Never a user error.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("cycle {cycle}: master {master} exceeded MOT ({outstanding} > {limit})")]
    MotExceeded {
        cycle: u64,
        master: Coord,
        outstanding: u32,
        limit: u32,
    },
    #[error("cycle {cycle}: response order violated at master {master} for id {id}")]
    OrderViolation { cycle: u64, master: Coord, id: u32 },
    #[error("cycle {cycle}: no remap entry for response id {id} at {xp}")]
    MissingRemap { cycle: u64, xp: Coord, id: u32 },
    #[error("cycle {cycle}: write data out of order at slave {slave}")]
    WriteDataOrder { cycle: u64, slave: Coord },
    #[error("cycle {cycle}: no progress for {idle} cycles with traffic in flight")]
    Stalled { cycle: u64, idle: u64 },
    #[error("did not drain within {limit} cycles")]
    DrainTimeout { limit: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeasurementError {
    #[error("measurement window is zero cycles")]
    ZeroCycles,
    #[error("no latency samples")]
    NoSamples,
    #[error("bisection bandwidth is zero")]
    ZeroBisection,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Axi(#[from] AxiError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
    #[error("sweep point {index} (load {load}): {source}")]
    SweepPoint {
        index: usize,
        load: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
