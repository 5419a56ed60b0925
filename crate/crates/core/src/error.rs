use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GmvError>;

#[derive(Debug, Error)]
pub enum GmvError {
    /// Invalid argument, dimension mismatch or violated precondition.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An all-zero ternary code carries no direction to reconstruct.
    #[error("degenerate code: all entries are zero")]
    DegenerateCode,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// Wraps an error with the pipeline stage that produced it.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<GmvError>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl GmvError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        GmvError::Parameter(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        GmvError::Numerical(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        GmvError::Format {
            offset,
            message: msg.into(),
        }
    }
}

/// Attach a stage name to any error surfaced by the experiment pipeline.
pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| GmvError::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
