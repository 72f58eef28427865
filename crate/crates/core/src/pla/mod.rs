//! The parameter-learning agent: observations from IR frames, the engagement
//! reward, a DDPG learner with adaptive parameter noise, action scaling onto
//! behaviour parameters and checkpointing.

mod action;
mod buffer;
mod checkpoint;
mod ddpg;
mod episode;
mod noise;
mod observation;

pub use action::{denormalize, normalize, normalize_params, scale_action, PlaAction, ACTION_DIM};
pub use buffer::{Batch, ReplayBuffer, Transition, REPLAY_CAPACITY};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use ddpg::{td_targets, Ddpg, DdpgConfig, TrainStats};
pub use episode::{Environment, EpisodeLog, NoiseRecord, PlaAgent, TransitionRecord};
pub use noise::{action_distance, perturbed_copy, NoiseAdaptation, NoiseState};
pub use observation::{build_observation, reward, Observation, ObservationBuilder, FRAMES_PER_OBSERVATION};

use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum PlaError {
    #[error("observation window has {got} frames, expected {expected}")]
    ObservationWindow { got: usize, expected: usize },
    #[error("{what} has dimension {got}, expected {expected}")]
    Dimension { what: &'static str, got: usize, expected: usize },
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error("environment failure: {0}")]
    Env(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
