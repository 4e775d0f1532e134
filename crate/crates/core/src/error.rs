use std::io;

use crate::numeric::Precision;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("ulp is undefined for {0}")]
    UndefinedUlp(&'static str),

    #[error("decimal scale {scale} exceeds the {precision} limit of {limit}")]
    InvalidScale {
        scale: u32,
        limit: u8,
        precision: Precision,
    },

    #[error("scaled value does not fit in 63 bits")]
    ScaleOverflow,

    #[error("malformed chunk header: alpha={alpha} beta_hat={beta_hat}")]
    MalformedHeader { alpha: u8, beta_hat: u8 },

    #[error("corrupt chunk: {0}")]
    CorruptChunk(String),

    #[error("corrupt archive: {0}")]
    CorruptArchive(String),

    #[error("batch {index}: {source}")]
    CorruptBatch {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("archive holds {archive} values but {requested} was requested")]
    PrecisionMismatch {
        archive: Precision,
        requested: Precision,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("offset overflow while summing chunk sizes")]
    OffsetOverflow,

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn corrupt_chunk(msg: impl Into<String>) -> Self {
        Error::CorruptChunk(msg.into())
    }

    pub(crate) fn corrupt_archive(msg: impl Into<String>) -> Self {
        Error::CorruptArchive(msg.into())
    }
}
