use std::path::PathBuf;

/// Errors raised while loading, importing or configuring a run.
///
/// Conditions that are verdicts rather than failures (an islanded genome, a
/// non-converging AC case, an unsplittable station) are reported through the
/// corresponding result types instead.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("invalid grid: {0}")]
    Validation(String),
    #[error("contingency `{0}` disconnects the base-case grid")]
    IslandedContingency(String),
    #[error("nodal susceptance matrix is singular; the grid is disconnected")]
    SingularSystem,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
