//! Simulated end effector, task scenarios and episode driving.

mod episode;
mod operator;
mod scenario;
mod servo;

use thiserror::Error;

use crate::retarget::RetargetError;

pub use episode::{
    run_closed_loop, run_episode, summarize_trajectory, Episode, EpisodeReport, EpisodeRunner, Operator,
    TrajectorySample, TrajectorySummary, MAX_SETTLE_TIME,
};
pub use operator::{InsertionScript, ScriptedInserter};
pub use scenario::{check_scenario, Scenario, ScenarioKind, ScenarioOutcome};
pub use servo::{servo_step, ArmState, ServoConfig, SimArm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error(transparent)]
    Retarget(#[from] RetargetError),
}
