//! Error type shared by all taskmapper modules.

use thiserror::Error;

/// Errors produced by parsing, validation, mapping and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// Underlying I/O failure (missing file, unreadable path, ...).
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// The document does not conform to the file schema (bad syntax,
    /// unknown key, wrong type). `line` is 1-based when known.
    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    /// The document parsed but violates a model invariant. `entity`
    /// names the offending label, runnable, task, host or link.
    #[error("validation error on `{entity}`: {message}")]
    Validation { entity: String, message: String },

    /// The lifted runnable dependency graph contains a cycle.
    #[error("dependency cycle involving `{entity}`")]
    Cycle { entity: String },

    /// No route is declared for an ordered host pair.
    #[error("no route from `{src}` to `{dst}`")]
    NoRoute { src: String, dst: String },

    /// A numeric argument is outside its documented domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The platform has no host eligible for mapping.
    #[error("platform has no eligible host")]
    EmptyPlatform,

    /// A mapping references a host absent from the platform.
    #[error("unknown host `{0}`")]
    UnknownHost(String),

    /// Invalid argument to a generator or strategy.
    #[error("argument error: {0}")]
    Argument(String),

    /// The mapping is partial or inconsistent with the application/platform.
    #[error("mapping error: {0}")]
    Mapping(String),

    /// The kernel ran out of work with runnables still pending. Given an
    /// acyclic dependency graph this indicates a kernel bug and is
    /// surfaced, never swallowed.
    #[error("deadlock: {0}")]
    Deadlock(String),

    /// summarize_batch was called on an empty result list.
    #[error("empty batch")]
    EmptyBatch,
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn schema(err: &serde_json::Error) -> Self {
        Error::Schema {
            line: err.line(),
            message: err.to_string(),
        }
    }

    pub(crate) fn validation(entity: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            entity: entity.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
