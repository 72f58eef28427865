use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::pb::{apply_activations, ParamVector, PbEngine};
use crate::pla::{scale_action, Environment, Observation, ObservationBuilder, PlaAction, PlaError, ACTION_DIM};
use crate::sculpture::{IrFrame, IrSensorModel, NodeTopology, SculptureState, TICK_S};
use crate::visitors::{Crowd, ScheduledArrival};

use super::HarnessError;

/// Line-per-record JSON writer.
pub struct JsonlWriter {
    out: BufWriter<File>,
}

impl JsonlWriter {
    pub fn create(path: &Path) -> Result<Self, HarnessError> {
        let file = File::create(path).map_err(|e| HarnessError::Write(path.to_path_buf(), e))?;
        Ok(Self { out: BufWriter::new(file) })
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<(), HarnessError> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), HarnessError> {
        self.out.flush()?;
        Ok(())
    }
}

/// Seeds and settings for one slot's simulation.
pub struct SimSetup<'a> {
    pub topology: &'a NodeTopology,
    pub sensors: IrSensorModel,
    pub sma_cooldown: f64,
    pub params: ParamVector,
    pub arrivals: Vec<ScheduledArrival>,
    pub sim_seed: u64,
    pub engine_seed: u64,
    pub visitor_seed: u64,
    pub start: f64,
    pub end: f64,
}

/// Sculpture, behaviour engine and crowd stepped together at the tick rate,
/// writing IR frames and activations as it goes.
pub struct LasSim {
    sculpture: SculptureState,
    engine: PbEngine,
    crowd: Crowd,
    params: ParamVector,
    ticks_done: u64,
    start: f64,
    end: f64,
    ir_log: JsonlWriter,
    activation_log: JsonlWriter,
}

impl LasSim {
    pub fn new(setup: SimSetup<'_>, ir_log: JsonlWriter, activation_log: JsonlWriter) -> Self {
        let sculpture = SculptureState::with_sensors(setup.topology.clone(), setup.sensors, setup.sim_seed)
            .with_sma_cooldown(setup.sma_cooldown)
            .with_start_time(setup.start);
        let engine = PbEngine::new(setup.topology.clone(), &setup.params, setup.engine_seed, setup.start);
        let crowd = Crowd::new(setup.arrivals, setup.visitor_seed, &sculpture);
        Self {
            sculpture,
            engine,
            crowd,
            params: setup.params,
            ticks_done: 0,
            start: setup.start,
            end: setup.end,
            ir_log,
            activation_log,
        }
    }

    pub fn now(&self) -> f64 {
        self.start + self.ticks_done as f64 * TICK_S
    }

    /// Ticks that still fit before the slot ends.
    pub fn remaining_ticks(&self) -> u64 {
        (((self.end - self.start) / TICK_S).round() as u64).saturating_sub(self.ticks_done)
    }

    pub fn set_params(&mut self, params: ParamVector) {
        self.params = params;
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    /// One tick: visitors move, sensors read, the engine reacts and the
    /// sculpture clock advances.
    pub fn tick(&mut self) -> Result<IrFrame, HarnessError> {
        if self.remaining_ticks() == 0 {
            return Err(HarnessError::SlotOver);
        }
        let now = self.now();
        self.crowd.spawn_visitors(now);
        self.crowd.advance(now, TICK_S, &mut self.sculpture);
        let mut frame = self.sculpture.read_ir_frame();
        frame.timestamp = now;
        let acts: Vec<_> = self
            .engine
            .tick(&self.params, &frame, now)?
            .into_iter()
            .filter(|a| a.t < self.end)
            .collect();
        for record in apply_activations(&mut self.sculpture, &acts)? {
            self.activation_log.write(&record)?;
        }
        self.ir_log.write(&frame)?;
        self.ticks_done += 1;
        self.sculpture.step(TICK_S);
        Ok(frame)
    }

    pub fn finish(self) -> Result<(), HarnessError> {
        self.ir_log.finish()?;
        self.activation_log.finish()
    }
}

/// The sculpture as an agent environment: an action sets the behaviour
/// parameters and the observation is the mean of the next 20 frames.
pub struct LasEnv {
    pub sim: LasSim,
    builder: ObservationBuilder,
}

impl LasEnv {
    pub fn new(sim: LasSim) -> Self {
        Self { sim, builder: ObservationBuilder::new() }
    }

    fn next_observation(&mut self) -> Result<Observation, PlaError> {
        loop {
            let frame = self.sim.tick().map_err(|e| PlaError::Env(e.to_string()))?;
            if let Some(obs) = self.builder.push(frame)? {
                return Ok(obs);
            }
        }
    }
}

impl Environment for LasEnv {
    fn obs_dim(&self) -> usize {
        self.sim.sculpture.node_count()
    }

    fn action_dim(&self) -> usize {
        ACTION_DIM
    }

    fn observe(&mut self) -> Result<Vec<f64>, PlaError> {
        Ok(self.next_observation()?.values)
    }

    fn step(&mut self, action: &[f64]) -> Result<Vec<f64>, PlaError> {
        let action = PlaAction::from_slice(action)?;
        self.sim.set_params(scale_action(&action));
        Ok(self.next_observation()?.values)
    }

    fn time(&self) -> f64 {
        self.sim.now()
    }
}
