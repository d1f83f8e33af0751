use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("bad IDX magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("IDX stream truncated: header promises {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("unsupported IDX image shape {rows}x{cols} (expected 28x28)")]
    BadShape { rows: usize, cols: usize },
    #[error("label {label} out of range at index {index}")]
    BadLabel { index: usize, label: u8 },
    #[error("not enough patterns of digit {0}")]
    InsufficientPatterns(u8),

    #[error("Hermite order {0} exceeds the supported maximum of 64")]
    OrderTooLarge(u32),
    #[error("mode HG({m},{n}) leaks {tail:.3e} of its energy outside the grid window")]
    ModeTruncated { m: u32, n: u32, tail: f64 },
    #[error("pattern transmits no light")]
    DarkPattern,
    #[error("field grids have different geometry")]
    GeometryMismatch,
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid mode set: {0}")]
    InvalidModeSet(String),
    #[error("pattern is orthogonal to every mode")]
    AllModesDark,
    #[error("label {0} has no usable patterns")]
    EmptyLabel(u8),
    #[error("no photon detected")]
    NoDetection,
    #[error("invalid photon schedule: {0}")]
    InvalidSchedule(String),
    #[error("mode family has {0} distinct entries, at least 10 required")]
    FamilyTooSmall(usize),

    #[error("label {0} has no pixel with a nonzero count")]
    Degenerate(u8),
    #[error("confusion row {0} has no events")]
    EmptyRow(usize),
    #[error("waist scan needs at least one waist")]
    EmptyScan,

    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed {what}: {detail}")]
    Parse { what: &'static str, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the configuration rather than the data.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidModeSet(_)
                | Error::InvalidSchedule(_)
                | Error::InvalidGeometry(_)
                | Error::EmptyScan
                | Error::FamilyTooSmall(_)
                | Error::OrderTooLarge(_)
                | Error::ModeTruncated { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
