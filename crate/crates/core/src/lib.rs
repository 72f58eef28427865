//! Simulation, behaviour engines and learning agent for an interactive
//! sculpture of 24 sensor/actuator nodes.

pub mod analysis;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod pb;
pub mod pla;
pub mod sculpture;
pub mod units;
pub mod visitors;
