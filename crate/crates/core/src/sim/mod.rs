//! Closed-loop simulation of the typing study.

mod experiment;
mod phrases;
mod session;
mod tracker;
mod user;

pub use experiment::{
    offset_order, run_experiment, session_seed, system_order, ExperimentSpec, ExperimentTable, SessionRow,
    STUDY_OFFSETS,
};
pub use phrases::{bundled_phrases, load_phrases, parse_phrases, BUNDLED_PHRASES};
pub use session::{
    run_session, validate_phrase, SessionResult, SessionRunner, SessionSpec, SessionTelemetry, System,
};
pub use tracker::{TrackerModel, TrackerParams};
pub use user::{next_needed_key, SimUser, UserMode, UserParams, UserView};

use thiserror::Error;

use crate::keyboard::DwellTimeError;
use crate::types::SampleError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("phrase is empty")]
    EmptyPhrase,
    #[error("phrase {phrase:?} contains untypeable character {ch:?}")]
    Untypeable { phrase: String, ch: char },
    #[error("≥ 2 participants required for statistics")]
    TooFewParticipants,
    #[error("phrase corpus exhausted: {needed} sessions need unique phrases, only {available} available")]
    CorpusExhausted { needed: usize, available: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Dwell(#[from] DwellTimeError),
    #[error("{0}")]
    Io(String),
}
