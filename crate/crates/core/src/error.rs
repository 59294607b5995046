use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the geometry, solver, and optimization layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The star-shaped radius left the admissible band `0 < w < R` at a mesh node.
    #[error("geometry fault at time level {level}, node {node}: radius {radius} outside (0, {limit})")]
    Geometry {
        level: usize,
        node: usize,
        radius: f64,
        limit: f64,
    },

    #[error("source level {source_level} is later than target level {target_level}")]
    Ordering { source_level: usize, target_level: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("line search failed after {trials} trials")]
    LineSearch { trials: usize },

    #[error("missing input file {}", .0.display())]
    MissingData(PathBuf),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_geometry_fault(&self) -> bool {
        matches!(self, Error::Geometry { .. })
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
