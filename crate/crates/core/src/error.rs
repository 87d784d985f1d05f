use thiserror::Error;

/// Errors surfaced by configuration, generation and simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown partition {0}")]
    UnknownPartition(u32),

    #[error("transaction {0} has empty read and write sets")]
    EmptyTransaction(u64),

    #[error("cannot generate {class} transaction: {reason}")]
    Generation { class: String, reason: String },

    #[error("unknown endpoint: region {region}, server {slot}")]
    UnknownEndpoint { region: u16, slot: u16 },

    #[error("fault schedule error: {0}")]
    Schedule(String),

    #[error("unknown protocol '{name}' (available: {available})")]
    UnknownProtocol { name: String, available: String },

    #[error("protocol '{0}' is already registered")]
    DuplicateProtocol(String),

    #[error("engine assertion failed: {0}")]
    Engine(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
