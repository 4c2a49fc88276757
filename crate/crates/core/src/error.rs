use thiserror::Error;

use crate::model::LayerRole;

/// Errors produced by the core engine.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum Error {
    #[error("invalid bit split {msb}/{lsb}: both parts must be non-zero and sum to 8")]
    InvalidBitSplit { msb: u8, lsb: u8 },

    #[error("buffer of {len} values does not match {channels}x{width}x{height}")]
    ShapeMismatch {
        channels: usize,
        width: usize,
        height: usize,
        len: usize,
    },

    #[error("image must not be empty")]
    EmptyImage,

    #[error("value {0} is not an 8-bit intensity")]
    IntensityOutOfRange(i64),

    #[error("expected {expected} channels, found {found}")]
    ChannelMismatch { expected: usize, found: usize },

    #[error("shift ({dx}, {dy}) exceeds the maximum offset of 2")]
    ShiftOutOfRange { dx: i8, dy: i8 },

    #[error("rotation must be 0..=3 quarter turns, got {0}")]
    InvalidRotation(u8),

    #[error("index {index} out of range for a {bits}-bit table")]
    IndexOutOfRange { index: i64, bits: u8 },

    #[error("stride {0} is not a supported power of two")]
    InvalidStride(u32),

    #[error("table has {found} entries, expected {expected}")]
    EntryCount { expected: usize, found: usize },

    #[error("feature map is not quantized to {expected} index bits")]
    Unquantized { expected: u8 },

    #[error("{role:?} layer expects {expected} tables, found {found}")]
    TableCount {
        role: LayerRole,
        expected: usize,
        found: usize,
    },

    #[error("table {index} does not match its slot: {reason}")]
    TableSlot { index: usize, reason: &'static str },

    #[error("invalid model descriptor: {0}")]
    InvalidDescriptor(&'static str),

    #[error("branch is not materialized by this network")]
    BranchNotMaterialized,

    #[error("images differ in size: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("image is too small for this metric (minimum side {0})")]
    ImageTooSmall(usize),

    #[error("table is already subsampled (stride {0}); a stride-1 source is required")]
    NotDense(u32),

    #[error("tolerance must be positive")]
    InvalidTolerance,
}

pub type Result<T> = core::result::Result<T, Error>;
