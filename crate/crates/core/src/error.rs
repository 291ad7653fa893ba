use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report.
///
/// Each variant maps to a stable machine-readable code (see [`Error::code`]) so
/// front ends can surface errors as a single parseable line.
#[derive(Debug, Error)]
pub enum Error {
    #[error("haplotype matrix is empty")]
    EmptyMatrix,

    #[error("non-binary allele {value} at variant {variant}, haplotype {haplotype}")]
    NonBinaryAllele {
        variant: usize,
        haplotype: usize,
        value: String,
    },

    #[error("at least 2 haplotypes are required, got {0}")]
    TooFewHaplotypes(usize),

    #[error("no haplotype cache loaded")]
    NoCache,

    #[error("{what} index {index} out of range (must be < {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("unknown {what} id {id:?}")]
    UnknownId { what: &'static str, id: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid recipient window {from}..={to} for {n_haps} haplotypes")]
    InvalidWindow { from: usize, to: usize, n_haps: usize },

    #[error("parameter hash mismatch: table was built for {table}, got {given}")]
    ParamsMismatch { table: String, given: String },

    #[error("cannot propagate from variant {current} to {target}; reset the table first")]
    WrongDirection { current: usize, target: usize },

    #[error("table is not initialised to any variant")]
    Uninitialised,

    #[error("tables are at different variants ({forward} vs {backward})")]
    VariantMismatch { forward: usize, backward: usize },

    #[error("table shapes or windows differ: {0}")]
    ShapeMismatch(String),

    #[error("distance matrix needs the full recipient window; got {from}..={to} of {n_haps}, combine windowed slabs instead")]
    PartialWindow { from: usize, to: usize, n_haps: usize },

    #[error("instance too large for the reference oracle: {0}")]
    TooLarge(String),

    #[error("failed to allocate {bytes} bytes")]
    Allocation { bytes: usize },

    #[error("invalid kernel configuration: {0}")]
    Config(String),

    #[error("{path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("{path}: unsupported format version {found} (expected {expected})")]
    Version { path: PathBuf, found: u16, expected: u16 },

    #[error("{0} already exists (pass overwrite to replace it)")]
    Exists(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[cfg(feature = "hdf5")]
    #[error("hdf5: {0}")]
    Hdf5(#[from] hdf5::Error),
}

impl Error {
    /// Stable error code for command-line reporting.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyMatrix => "E_EMPTY",
            Error::NonBinaryAllele { .. } => "E_NONBINARY",
            Error::TooFewHaplotypes(_) => "E_TOO_FEW_HAPS",
            Error::NoCache => "E_NO_CACHE",
            Error::IndexOutOfRange { .. } => "E_INDEX",
            Error::UnknownId { .. } => "E_UNKNOWN_ID",
            Error::InvalidParameter(_) => "E_PARAM",
            Error::DimensionMismatch(_) => "E_DIM",
            Error::Unsupported(_) => "E_UNSUPPORTED",
            Error::InvalidWindow { .. } => "E_WINDOW",
            Error::ParamsMismatch { .. } => "E_PARAMS_HASH",
            Error::WrongDirection { .. } => "E_DIRECTION",
            Error::Uninitialised => "E_UNINIT",
            Error::VariantMismatch { .. } => "E_VARIANT_MISMATCH",
            Error::ShapeMismatch(_) => "E_SHAPE",
            Error::PartialWindow { .. } => "E_PARTIAL_WINDOW",
            Error::TooLarge(_) => "E_TOO_LARGE",
            Error::Allocation { .. } => "E_ALLOC",
            Error::Config(_) => "E_CONFIG",
            Error::Parse { .. } => "E_PARSE",
            Error::Format { .. } => "E_FORMAT",
            Error::Version { .. } => "E_VERSION",
            Error::Exists(_) => "E_EXISTS",
            Error::Io { .. } => "E_IO",
            #[cfg(feature = "hdf5")]
            Error::Hdf5(_) => "E_HDF5",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
