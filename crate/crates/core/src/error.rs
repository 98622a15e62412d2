//! Crate-wide error type.

use crate::boundary::Structure;

/// Errors produced by the pipeline.
///
/// The CLI maps variants to exit codes: `Domain` → 2, `Io`/`Format` → 3,
/// `EmptyRegion` → 4.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition or parameter constraint was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// Filesystem-level failure (missing files, unwritable paths).
    #[error("I/O error: {0}")]
    Io(String),

    /// Input bytes were readable but malformed (bad labels, bad JSON, bad headers).
    #[error("format error: {0}")]
    Format(String),

    /// A structure has no pixels in some frame, so there is nothing to track.
    #[error("empty region: structure {structure} has no boundary candidates in frame {frame}")]
    EmptyRegion { structure: Structure, frame: usize },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn io(msg: impl Into<String>) -> Self {
        Error::Io(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
