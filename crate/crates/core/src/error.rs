use thiserror::Error;

use crate::corpus::CorpusError;
use crate::embed::EmbedError;
use crate::eval::EvalError;
use crate::labeler::LabelError;
use crate::net::{CheckpointError, NetError};
use crate::pipeline::PipelineError;
use crate::rouge::RougeError;
use crate::summarize::SummarizeError;
use crate::train::{ConfigError, TrainError};

/// Any error the toolkit can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Rouge(#[from] RougeError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Summarize(#[from] SummarizeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Pipeline(#[from] Box<PipelineError>),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
