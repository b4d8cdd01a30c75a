use thiserror::Error;

use crate::fgo::VariableKey;

#[derive(Debug, Error)]
pub enum JpcmError {
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),

    #[error("variable {0} already exists")]
    DuplicateKey(VariableKey),

    #[error("unknown variable {0}")]
    UnknownKey(VariableKey),

    #[error("variable {key} given a value of the wrong kind")]
    KindMismatch { key: VariableKey },

    #[error("factor {index} ({name}) produced non-finite {what}")]
    NonFinite {
        index: usize,
        name: String,
        what: &'static str,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("wrench requires negative squared rotor speed on rotor {rotor} ({value:e})")]
    InfeasibleWrench { rotor: usize, value: f64 },

    #[error("expected {expected} reference points, got {got}")]
    ReferenceLength { expected: usize, got: usize },

    #[error("window buffer is empty")]
    EmptyBuffer,

    #[error("log is empty")]
    EmptyLog,

    #[error("empty graph: {0}")]
    EmptyGraph(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = JpcmError> = std::result::Result<T, E>;
