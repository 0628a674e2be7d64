use thiserror::Error;

/// Errors produced by the data, model, explanation and pipeline layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("feature arity mismatch: expected {expected}, got {actual}")]
    ArityMismatch { expected: usize, actual: usize },

    #[error("dataset is not labeled; run RUL labeling first")]
    Unlabeled,

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("singular linear system")]
    SingularSystem,

    #[error("model file version {found} is not supported (this build reads version {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("degenerate background: every feature is constant")]
    DegenerateBackground,

    #[error("feature subset of size {size} exceeds the exact-enumeration bound of {max}")]
    SubsetTooLarge { size: usize, max: usize },

    #[error("selection rule would drop every feature")]
    EmptySelection,

    #[error("all grid combinations failed to train")]
    AllCombinationsFailed,

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// Tag an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    /// The innermost error, unwrapping stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
