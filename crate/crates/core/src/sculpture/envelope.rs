use serde::{Deserialize, Serialize};

use super::SculptureError;

/// Length of the fixed SMA contraction pulse, seconds.
pub const SMA_PULSE_S: f64 = 1.0;
/// Default time an SMA wire rests after a pulse, seconds.
pub const SMA_COOLDOWN_S: f64 = 10.0;
/// SMA fronds per node.
pub const SMAS_PER_NODE: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActuatorKind {
    Moth,
    Led,
    Sma,
}

/// Ramp-up / hold / ramp-down intensity profile.
///
/// SMA envelopes are a fixed rectangular pulse followed by a cooldown during
/// which the wire refuses re-activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorEnvelope {
    pub kind: ActuatorKind,
    pub start_time: f64,
    pub t_ramp_up: f64,
    pub t_hold: f64,
    pub t_ramp_down: f64,
    pub peak: f64,
    pub cooldown: f64,
}

impl ActuatorEnvelope {
    /// Moth or LED envelope.
    pub fn ramp(
        kind: ActuatorKind,
        start_time: f64,
        t_ramp_up: f64,
        t_hold: f64,
        t_ramp_down: f64,
        peak: f64,
    ) -> Result<Self, SculptureError> {
        let env = Self { kind, start_time, t_ramp_up, t_hold, t_ramp_down, peak, cooldown: 0.0 };
        env.validate()?;
        Ok(env)
    }

    /// The fixed SMA pulse.
    pub fn sma_pulse(start_time: f64, cooldown: f64) -> Self {
        Self {
            kind: ActuatorKind::Sma,
            start_time,
            t_ramp_up: 0.0,
            t_hold: SMA_PULSE_S,
            t_ramp_down: 0.0,
            peak: 1.0,
            cooldown,
        }
    }

    pub fn validate(&self) -> Result<(), SculptureError> {
        let durations = [self.t_ramp_up, self.t_hold, self.t_ramp_down, self.cooldown];
        if durations.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(SculptureError::Envelope(format!("negative or non-finite duration in {self:?}")));
        }
        if !(0.0..=1.0).contains(&self.peak) {
            return Err(SculptureError::Envelope(format!("peak {} outside [0,1]", self.peak)));
        }
        if !self.start_time.is_finite() {
            return Err(SculptureError::Envelope("non-finite start time".into()));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.t_ramp_up + self.t_hold + self.t_ramp_down
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration()
    }

    /// Time after which an SMA may fire again.
    pub fn cooldown_until(&self) -> f64 {
        self.end_time() + self.cooldown
    }

    /// Piecewise-linear intensity at absolute time `t`.
    pub fn intensity(&self, t: f64) -> f64 {
        let dt = t - self.start_time;
        if dt < 0.0 {
            return 0.0;
        }
        if self.kind == ActuatorKind::Sma {
            return if dt < self.t_hold { self.peak } else { 0.0 };
        }
        if dt < self.t_ramp_up {
            return self.peak * dt / self.t_ramp_up;
        }
        let dt = dt - self.t_ramp_up;
        if dt <= self.t_hold {
            return self.peak;
        }
        let dt = dt - self.t_hold;
        if dt < self.t_ramp_down {
            self.peak * (1.0 - dt / self.t_ramp_down)
        } else {
            0.0
        }
    }
}
