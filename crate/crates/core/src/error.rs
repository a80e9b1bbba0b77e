use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid time interval [{onset}, {offset}]")]
    InvalidInterval { onset: f64, offset: f64 },

    #[error("rttm line {line}: {msg}")]
    RttmParse { line: usize, msg: String },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("records span multiple files: {0} and {1}")]
    MixedFiles(String, String),

    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("sample rate {found} Hz does not match {expected} Hz; resample the file externally")]
    SampleRate { found: u32, expected: u32 },

    #[error("signal too short: {len} samples, need at least {need}")]
    SignalTooShort { len: usize, need: usize },

    #[error("segment [{onset:.3}, {offset:.3}] lies outside the audio ({duration:.3} s)")]
    SegmentOutOfRange { onset: f64, offset: f64, duration: f64 },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot sample batch: {0}")]
    Sampling(String),

    #[error("nothing to score: collar removes all reference speech")]
    NothingToScore,

    #[error("too many speakers for exhaustive mapping: {0}")]
    TooManySpeakers(usize),

    #[error("length mismatch: {0} segments vs {1} labels")]
    LengthMismatch(usize, usize),

    #[error("bad file format in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: &str, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            msg: msg.into(),
        }
    }
}
