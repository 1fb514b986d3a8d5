use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("unknown tap `{0}`")]
    UnknownTap(String),
    #[error("weight shape mismatch at layer `{layer}`: {detail}")]
    WeightShape { layer: String, detail: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("structural error: {0}")]
    Structural(String),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("provenance mismatch: {0}")]
    Provenance(String),
    #[error("label `{0}` is not known to the model")]
    UnknownLabel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty manifest")]
    EmptyManifest,
    #[error("manifest line {line}: {detail}")]
    Manifest { line: usize, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
