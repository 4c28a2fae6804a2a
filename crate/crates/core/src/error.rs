use std::path::PathBuf;

/// Errors produced anywhere in the reconstruction pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty geometry")]
    EmptyGeometry,

    #[error("degenerate mesh: {0}")]
    DegenerateMesh(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error in {path} at {location}: {message}")]
    Parse {
        path: String,
        location: String,
        message: String,
    },

    #[error("unsupported file format: {0}")]
    UnsupportedFormat(PathBuf),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("sampler diverged at step {step} (chain {chain})")]
    SamplerDiverged { step: usize, chain: usize },

    #[error("non-finite loss at update {update}")]
    NonFiniteLoss { update: usize },

    #[error("empty level set")]
    EmptyLevelSet,

    #[error("object not visible")]
    NotVisible,

    #[error("point cloud has no normals")]
    MissingNormals,

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
