use std::path::PathBuf;

use thiserror::Error;

/// Pipeline stage a failure originated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Normals,
    Scale,
    Keypoints,
    Descriptors,
    Correspondences,
    Reliability,
    Triplets,
    Voting,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Stage::Normals => "normals",
            Stage::Scale => "medD",
            Stage::Keypoints => "keypoints",
            Stage::Descriptors => "fpfh",
            Stage::Correspondences => "correspondences",
            Stage::Reliability => "reliability",
            Stage::Triplets => "triplets",
            Stage::Voting => "voting",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate neighborhood at point {index}: all neighbors coincide")]
    DegenerateNeighborhood { index: usize },

    #[error("degenerate point pair: coincident points")]
    DegeneratePair,

    #[error("degenerate triplet: collinear or coincident points")]
    DegenerateTriplet,

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error in {path}: {message} (at {location})")]
    Parse {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// The stage label, if the error was raised inside the pipeline.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) trait StageExt<T> {
    fn at(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn at(self, stage: Stage) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
