use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("DivisibilityError: {axis} extent {extent} is not divisible by cell {cell}")]
    Divisibility { axis: &'static str, extent: u32, cell: u32 },
    #[error("RangeError: {0}")]
    Range(String),
    #[error("MinSizeError: splitting a {side}-pixel region would go below the {min}-pixel floor")]
    MinSize { side: u32, min: u32 },
    #[error("NotContractive: planar ratio {ratio} is not below 1")]
    NotContractive { ratio: f64 },
    #[error("OutOfRect: ({x}, {y}) lies outside the rectangle")]
    OutOfRect { x: f64, y: f64 },
    #[error("EmptyRow: row {0} has no admissible successor")]
    EmptyRow(usize),
    #[error("InvalidTransition: {from} -> {to} is not allowed by the connection matrix")]
    InvalidTransition { from: usize, to: usize },
    #[error("SamplingError: {0}")]
    Sampling(String),
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("EmptyPool: no domain of side {side} fits a {width}x{height} image")]
    EmptyPool { side: u32, width: u32, height: u32 },
    #[error("CorruptCode: {0}")]
    CorruptCode(String),
    #[error("FormatError: {0}")]
    Format(String),
    #[error("DimensionError: {0}")]
    Dimension(String),
    #[error("DimensionMismatch: {0}")]
    DimensionMismatch(String),
    #[error("MagicMismatch: stream does not start with \"RIFC\"")]
    MagicMismatch,
    #[error("VersionError: unsupported stream version {0}")]
    Version(u8),
    #[error("TruncatedStream: needed {needed} more byte(s) at offset {offset}")]
    TruncatedStream { offset: usize, needed: usize },
    #[error("ChecksumError: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("MalformedStream: {0}")]
    Malformed(String),
    #[error("InvalidConfig: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}
