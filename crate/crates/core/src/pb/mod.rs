//! Pre-scripted behaviour: the designers' state machine of local reflexes,
//! neighbour cascades, background activity and LED sweeps.

mod engine;
mod params;

pub use engine::{
    apply_activations, local_reflex, Activation, ActivationEvent, ActivationRecord, Mode, PbEngine,
    PbState, SweepDirection, TRIGGER_REFRACTORY_S, TRIGGER_THRESHOLD,
};
pub use params::{default_params, Param, ParamVector};

use crate::sculpture::SculptureError;

#[derive(Debug, thiserror::Error)]
pub enum PbError {
    #[error("parameter {name} = {value} outside [{lo}, {hi}]")]
    ParamOutOfRange { name: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("{0} must not exceed {1}")]
    InvertedPair(&'static str, &'static str),
    #[error("unknown parameter {0:?}")]
    UnknownParam(String),
    #[error("ir frame has {got} readings, expected {expected}")]
    FrameLength { got: usize, expected: usize },
    #[error(transparent)]
    Sculpture(#[from] SculptureError),
}
