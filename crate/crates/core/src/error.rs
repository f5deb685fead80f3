use std::path::PathBuf;

use thiserror::Error;

use crate::qa::Question;

#[derive(Debug, Error)]
pub enum Error {
    #[error("object count {0} outside [{min}, {max}]", min = crate::world::MIN_OBJECTS, max = crate::world::MAX_OBJECTS)]
    ObjectCount(usize),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("beam size {beam} exceeds question universe of {universe}")]
    BeamSize { beam: usize, universe: usize },

    #[error("scene {0} has no target")]
    MissingTarget(String),

    #[error("belief does not match scene {0}")]
    BeliefMismatch(String),

    #[error("contradiction: no candidate is consistent with {0}")]
    Contradiction(Question),

    #[error("game is already finished")]
    GameFinished,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("scene {scene}: {message}")]
    InvalidScene { scene: String, message: String },

    #[error("{0}")]
    Argument(String),

    #[error("episode {episode}: scene {scene} not found")]
    SceneLookup { episode: String, scene: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
