//! Discrete-time model of the sculpture: actuator envelopes on each node and
//! the ceiling-mounted IR proximity sensors that observe visitors.

mod envelope;
mod topology;

pub use envelope::{ActuatorEnvelope, ActuatorKind, SMAS_PER_NODE, SMA_COOLDOWN_S, SMA_PULSE_S};
pub use topology::{
    NodeTopology, TopologyFile, CANONICAL_COLS, CANONICAL_NODE_COUNT, CANONICAL_ROWS,
    CANONICAL_SPACING_M,
};

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Simulator tick, seconds.
pub const TICK_S: f64 = 0.1;
/// Distance at and beyond which a sensor reads 0, centimetres.
pub const IR_FAR_CM: f64 = 80.0;
/// Distance at and below which a sensor reads 1, centimetres.
pub const IR_NEAR_CM: f64 = 10.0;
/// Raw actuator channels per node: moth, LED, six SMAs.
pub const CHANNELS_PER_NODE: usize = 2 + SMAS_PER_NODE;

#[derive(Debug, thiserror::Error)]
pub enum SculptureError {
    #[error("distance must be positive, got {0} cm")]
    Domain(f64),
    #[error("node {node} out of range (node count {count})")]
    NodeOutOfRange { node: usize, count: usize },
    #[error("sma index {0} out of range")]
    SmaOutOfRange(usize),
    #[error("raw action has {got} components, expected {expected}")]
    RawActionLength { got: usize, expected: usize },
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("invalid envelope: {0}")]
    Envelope(String),
    #[error("frame io: {0}")]
    Io(#[from] std::io::Error),
    #[error("frame decode: {0}")]
    Json(#[from] serde_json::Error),
}

/// Maps a sensed distance onto the `[0,1]` reading scale: 1 when an object is
/// at 10 cm or closer, 0 at 80 cm or farther, linear in between.
pub fn scale_distance_to_reading(distance_cm: f64) -> Result<f64, SculptureError> {
    if distance_cm.is_nan() || distance_cm <= 0.0 {
        return Err(SculptureError::Domain(distance_cm));
    }
    Ok(((IR_FAR_CM - distance_cm) / (IR_FAR_CM - IR_NEAR_CM)).clamp(0.0, 1.0))
}

/// Distance corresponding to a reading on the linear part of the scale.
pub fn reading_to_distance(reading: f64) -> f64 {
    IR_FAR_CM - reading.clamp(0.0, 1.0) * (IR_FAR_CM - IR_NEAR_CM)
}

/// One timestamped vector of scaled IR readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrFrame {
    #[serde(rename = "t")]
    pub timestamp: f64,
    #[serde(rename = "ir")]
    pub readings: Vec<f64>,
}

impl IrFrame {
    pub fn zeros(timestamp: f64, n: usize) -> Self {
        Self { timestamp, readings: vec![0.0; n] }
    }
}

pub fn write_frames_jsonl<W: Write>(mut out: W, frames: &[IrFrame]) -> Result<(), SculptureError> {
    for f in frames {
        serde_json::to_writer(&mut out, f)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_frames_jsonl<R: BufRead>(input: R) -> Result<Vec<IrFrame>, SculptureError> {
    let mut frames = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        frames.push(serde_json::from_str(&line)?);
    }
    Ok(frames)
}

/// A visitor as seen by the sensors: where they stand and how close their
/// highest extremity (head or raised hand) comes to the sensor plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisitorBody {
    pub id: u64,
    pub position: [f64; 2],
    pub clearance_cm: f64,
}

/// Sensor optics and noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrSensorModel {
    /// Half-angle of the vertical viewing cone, degrees.
    pub half_angle_deg: f64,
    /// Constant per-sensor offset added to every reading.
    pub baseline: Vec<f64>,
    /// Standard deviation of additive Gaussian noise.
    pub noise_std: f64,
}

impl IrSensorModel {
    pub fn ideal(n: usize) -> Self {
        Self { half_angle_deg: 30.0, baseline: vec![0.0; n], noise_std: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationOutcome {
    Applied,
    /// SMA still cooling down from an earlier pulse.
    SkippedCooldown,
    /// Moth/LED already running an envelope that has not finished.
    SkippedBusy,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Channel {
    envelopes: Vec<ActuatorEnvelope>,
    busy_until: f64,
    direct: Option<f64>,
}

/// Full simulator state. Mutated by a single stepping loop.
#[derive(Debug, Clone)]
pub struct SculptureState {
    topology: NodeTopology,
    sensors: IrSensorModel,
    sim_time: f64,
    channels: Vec<Channel>,
    sma_cooldown: f64,
    visitors: Vec<VisitorBody>,
    rng: ChaCha8Rng,
    skipped_activations: u64,
    clip_warnings: u64,
}

impl SculptureState {
    pub fn new(topology: NodeTopology, seed: u64) -> Self {
        let n = topology.node_count();
        Self::with_sensors(topology, IrSensorModel::ideal(n), seed)
    }

    pub fn with_sensors(topology: NodeTopology, sensors: IrSensorModel, seed: u64) -> Self {
        let n = topology.node_count();
        Self {
            channels: vec![Channel::default(); n * CHANNELS_PER_NODE],
            topology,
            sensors,
            sim_time: 0.0,
            sma_cooldown: SMA_COOLDOWN_S,
            visitors: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            skipped_activations: 0,
            clip_warnings: 0,
        }
    }

    /// Starts the clock at `t` instead of zero.
    pub fn with_start_time(mut self, t: f64) -> Self {
        self.sim_time = t;
        self
    }

    pub fn with_sma_cooldown(mut self, cooldown_s: f64) -> Self {
        self.sma_cooldown = cooldown_s.max(0.0);
        self
    }

    pub fn topology(&self) -> &NodeTopology {
        &self.topology
    }

    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    pub fn sim_time(&self) -> f64 {
        self.sim_time
    }

    pub fn sma_cooldown(&self) -> f64 {
        self.sma_cooldown
    }

    pub fn visitors(&self) -> &[VisitorBody] {
        &self.visitors
    }

    pub fn visitors_mut(&mut self) -> &mut Vec<VisitorBody> {
        &mut self.visitors
    }

    pub fn skipped_activations(&self) -> u64 {
        self.skipped_activations
    }

    pub fn clip_warnings(&self) -> u64 {
        self.clip_warnings
    }

    fn channel_index(&self, node: usize, kind: ActuatorKind, sma: usize) -> usize {
        let slot = match kind {
            ActuatorKind::Moth => 0,
            ActuatorKind::Led => 1,
            ActuatorKind::Sma => 2 + sma,
        };
        node * CHANNELS_PER_NODE + slot
    }

    /// Advances the clock and drops envelopes that have fully ended.
    pub fn step(&mut self, dt: f64) {
        self.sim_time += dt;
        let now = self.sim_time;
        for ch in &mut self.channels {
            ch.envelopes.retain(|e| e.end_time() >= now);
        }
    }

    /// Registers an envelope on a node's actuator. `sma` selects the frond for
    /// SMA activations and is ignored otherwise.
    ///
    /// SMA pulses inside a cooldown, and moth/LED envelopes that would start
    /// before the running one ends, are skipped and counted.
    pub fn activate(
        &mut self,
        node: usize,
        sma: usize,
        envelope: ActuatorEnvelope,
    ) -> Result<ActivationOutcome, SculptureError> {
        self.topology.check_node(node)?;
        if envelope.kind == ActuatorKind::Sma && sma >= SMAS_PER_NODE {
            return Err(SculptureError::SmaOutOfRange(sma));
        }
        envelope.validate()?;
        let mut envelope = envelope;
        if envelope.kind == ActuatorKind::Sma {
            envelope = ActuatorEnvelope::sma_pulse(envelope.start_time, self.sma_cooldown);
        }
        let idx = self.channel_index(node, envelope.kind, sma);
        let ch = &mut self.channels[idx];
        if envelope.start_time < ch.busy_until {
            self.skipped_activations += 1;
            let outcome = if envelope.kind == ActuatorKind::Sma {
                ActivationOutcome::SkippedCooldown
            } else {
                ActivationOutcome::SkippedBusy
            };
            log::debug!(
                "node {node} {:?}[{sma}] activation at {:.2}s skipped ({outcome:?})",
                envelope.kind,
                envelope.start_time
            );
            return Ok(outcome);
        }
        ch.busy_until = match envelope.kind {
            ActuatorKind::Sma => envelope.cooldown_until(),
            _ => envelope.end_time(),
        };
        ch.envelopes.push(envelope);
        Ok(ActivationOutcome::Applied)
    }

    /// Time until which an SMA refuses new pulses.
    pub fn sma_cooldown_until(&self, node: usize, sma: usize) -> f64 {
        self.channels[self.channel_index(node, ActuatorKind::Sma, sma)].busy_until
    }

    /// Current intensity of one actuator: the larger of any running envelope
    /// and a directly driven raw level.
    pub fn intensity(&self, node: usize, kind: ActuatorKind, sma: usize) -> f64 {
        let ch = &self.channels[self.channel_index(node, kind, sma)];
        let env = ch
            .envelopes
            .iter()
            .map(|e| e.intensity(self.sim_time))
            .fold(0.0, f64::max);
        env.max(ch.direct.unwrap_or(0.0))
    }

    pub fn led_intensities(&self) -> Vec<f64> {
        (0..self.node_count()).map(|n| self.intensity(n, ActuatorKind::Led, 0)).collect()
    }

    pub fn moth_intensities(&self) -> Vec<f64> {
        (0..self.node_count()).map(|n| self.intensity(n, ActuatorKind::Moth, 0)).collect()
    }

    /// Number of raw actuator channels (moth, LED and six SMAs per node).
    pub fn raw_channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Drives every actuator directly from a raw vector laid out node-major as
    /// `[moth, led, sma0..sma5]`. Out-of-range components are clipped and
    /// counted.
    pub fn apply_raw_action(&mut self, raw: &[f64]) -> Result<(), SculptureError> {
        if raw.len() != self.channels.len() {
            return Err(SculptureError::RawActionLength {
                got: raw.len(),
                expected: self.channels.len(),
            });
        }
        for (i, &value) in raw.iter().enumerate() {
            let kind = match i % CHANNELS_PER_NODE {
                0 => ActuatorKind::Moth,
                1 => ActuatorKind::Led,
                _ => ActuatorKind::Sma,
            };
            let (level, clipped) = raw_to_intensity(kind, value);
            if clipped {
                self.clip_warnings += 1;
            }
            self.channels[i].direct = Some(level);
        }
        Ok(())
    }

    /// Stops direct driving; envelopes alone determine intensities again.
    pub fn release_raw_action(&mut self) {
        for ch in &mut self.channels {
            ch.direct = None;
        }
    }

    /// Distance in cm from the nearest visitor extremity to each sensor, if
    /// any visitor is inside that sensor's viewing cone.
    pub fn nearest_distances(&self) -> Vec<Option<f64>> {
        let tan = self.sensors.half_angle_deg.to_radians().tan();
        self.topology
            .positions()
            .iter()
            .map(|p| {
                self.visitors
                    .iter()
                    .filter_map(|v| {
                        let dx = (v.position[0] - p[0]) * 100.0;
                        let dy = (v.position[1] - p[1]) * 100.0;
                        let planar = (dx * dx + dy * dy).sqrt();
                        let vertical = v.clearance_cm.max(0.0);
                        (planar <= vertical * tan + 1e-9)
                            .then(|| (vertical * vertical + planar * planar).sqrt())
                    })
                    .min_by(f64::total_cmp)
            })
            .collect()
    }

    /// Samples every IR sensor at the current time.
    pub fn read_ir_frame(&mut self) -> IrFrame {
        let distances = self.nearest_distances();
        let noise = (self.sensors.noise_std > 0.0)
            .then(|| Normal::new(0.0, self.sensors.noise_std).expect("valid std"));
        let readings = distances
            .into_iter()
            .enumerate()
            .map(|(i, d)| {
                let clean = match d {
                    Some(d) => scale_distance_to_reading(d.max(f64::MIN_POSITIVE)).unwrap_or(0.0),
                    None => 0.0,
                };
                let offset = self.sensors.baseline.get(i).copied().unwrap_or(0.0);
                let jitter = noise.as_ref().map_or(0.0, |n| n.sample(&mut self.rng));
                (clean + offset + jitter).clamp(0.0, 1.0)
            })
            .collect();
        IrFrame { timestamp: self.sim_time, readings }
    }
}

/// Raw `[-1,1]` command to actuator intensity. Returns the intensity and
/// whether the command had to be clipped.
///
/// SMAs switch on for commands in `[0,1]`; moths and LEDs map linearly onto
/// an 8-bit level `0..=255`, expressed as a fraction of 255.
pub fn raw_to_intensity(kind: ActuatorKind, raw: f64) -> (f64, bool) {
    let clipped = !(-1.0..=1.0).contains(&raw);
    let raw = if raw.is_nan() { -1.0 } else { raw.clamp(-1.0, 1.0) };
    let level = match kind {
        ActuatorKind::Sma => {
            if raw >= 0.0 {
                1.0
            } else {
                0.0
            }
        }
        _ => (raw + 1.0) * 127.5 / 255.0,
    };
    (level, clipped)
}
