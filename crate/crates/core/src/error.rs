use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("control index {index} out of range ({len} controls)")]
    ControlIndex { index: usize, len: usize },

    /// The cross-derivative stencil lost diagonal dominance, so the scheme is
    /// no longer monotone at this node.
    #[error("diagonal dominance violated at node {node:?} for control {control}: {detail}")]
    Stencil {
        node: Vec<usize>,
        control: usize,
        detail: String,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
