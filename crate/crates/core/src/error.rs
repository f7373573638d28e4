use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown mode label `{0}`")]
    UnknownMode(String),

    #[error("duplicate mode label `{0}`")]
    DuplicateMode(String),

    #[error("mode registry must contain at least one mode")]
    EmptyRegistry,

    #[error("registry mismatch: expected modes {expected:?}, found {found:?}")]
    RegistryMismatch { expected: Vec<String>, found: Vec<String> },

    #[error("occupation vector has {found} entries but the registry has {expected} modes")]
    OccupationLength { expected: usize, found: usize },

    #[error("bad partition: {0}")]
    Partition(String),

    #[error("term with {photons} photons exceeds the photon cap of {cap}")]
    PhotonCap { photons: u32, cap: u32 },

    #[error("matrix is {rows}x{cols}, expected a square matrix")]
    NotSquare { rows: usize, cols: usize },

    #[error("{what}: dimension {found}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what} is not unitary (max deviation {deviation:e})")]
    NonUnitary { what: &'static str, deviation: f64 },

    #[error("invalid outcome index {index} (device has {count} outcomes)")]
    InvalidOutcome { index: usize, count: usize },

    #[error("success probability is zero; the conditional map is undefined for this input")]
    ZeroProbability,

    #[error("degenerate device: every outcome has zero success probability")]
    Degenerate,

    #[error("empty family: no nonvanishing w matrix")]
    EmptyFamily,

    #[error("conditional map has no image on the output modes")]
    ZeroImage,

    #[error("invalid {what}: {detail}")]
    Validation { what: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("schema version {0} is not supported")]
    SchemaVersion(u32),
}

impl Error {
    pub(crate) fn validation(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Validation {
            what,
            detail: detail.into(),
        }
    }

    /// True for malformed input text, as opposed to a well-formed description of a
    /// physically invalid device.
    pub fn is_parse_error(&self) -> bool {
        matches!(self, Error::Parse(_) | Error::SchemaVersion(_))
    }
}
