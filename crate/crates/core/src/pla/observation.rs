use serde::{Deserialize, Serialize};

use crate::sculpture::IrFrame;

use super::PlaError;

/// IR frames averaged into one observation (two seconds at 10 Hz).
pub const FRAMES_PER_OBSERVATION: usize = 20;

/// Component-wise mean of the last window of IR frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub values: Vec<f64>,
    pub window_end: f64,
}

/// Averages exactly [`FRAMES_PER_OBSERVATION`] frames.
pub fn build_observation(frames: &[IrFrame]) -> Result<Observation, PlaError> {
    if frames.len() != FRAMES_PER_OBSERVATION {
        return Err(PlaError::ObservationWindow { got: frames.len(), expected: FRAMES_PER_OBSERVATION });
    }
    let n = frames[0].readings.len();
    if let Some(bad) = frames.iter().find(|f| f.readings.len() != n) {
        return Err(PlaError::Dimension {
            what: "ir frame",
            got: bad.readings.len(),
            expected: n,
        });
    }
    let mut values = vec![0.0; n];
    for f in frames {
        for (v, r) in values.iter_mut().zip(&f.readings) {
            *v += r;
        }
    }
    for v in &mut values {
        *v /= FRAMES_PER_OBSERVATION as f64;
    }
    let window_end = frames.iter().map(|f| f.timestamp).fold(f64::NEG_INFINITY, f64::max);
    Ok(Observation { values, window_end })
}

/// Collects frames into consecutive, non-overlapping observation windows.
#[derive(Debug, Clone, Default)]
pub struct ObservationBuilder {
    frames: Vec<IrFrame>,
}

impl ObservationBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a frame; returns an observation when a window completes.
    pub fn push(&mut self, frame: IrFrame) -> Result<Option<Observation>, PlaError> {
        self.frames.push(frame);
        if self.frames.len() < FRAMES_PER_OBSERVATION {
            return Ok(None);
        }
        let obs = build_observation(&self.frames)?;
        self.frames.clear();
        Ok(Some(obs))
    }

    pub fn pending(&self) -> usize {
        self.frames.len()
    }
}

/// Engagement reward: the sum of all observation components.
pub fn reward(next_obs: &[f64]) -> f64 {
    next_obs.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(values: impl Fn(usize) -> f64) -> Vec<IrFrame> {
        (0..20)
            .map(|k| IrFrame { timestamp: k as f64 * 0.1, readings: vec![values(k); 24] })
            .collect()
    }

    #[test]
    fn zero_frames_give_zero_observation() {
        let o = build_observation(&frames(|_| 0.0)).unwrap();
        assert_eq!(o.values, vec![0.0; 24]);
        assert!((o.window_end - 1.9).abs() < 1e-12);
    }

    #[test]
    fn half_zero_half_one_averages_to_half() {
        let o = build_observation(&frames(|k| if k < 10 { 0.0 } else { 1.0 })).unwrap();
        assert_eq!(o.values, vec![0.5; 24]);
    }

    #[test]
    fn constant_frames_are_preserved() {
        let o = build_observation(&frames(|_| 0.25)).unwrap();
        assert_eq!(o.values, vec![0.25; 24]);
    }

    #[test]
    fn short_window_is_an_error() {
        let f = frames(|_| 0.0);
        assert!(matches!(build_observation(&f[..19]), Err(PlaError::ObservationWindow { got: 19, .. })));
    }

    #[test]
    fn builder_emits_non_overlapping_windows() {
        let mut b = ObservationBuilder::new();
        let mut emitted = Vec::new();
        for k in 0..45 {
            let f = IrFrame { timestamp: k as f64 * 0.1, readings: vec![k as f64 / 100.0; 24] };
            if let Some(o) = b.push(f).unwrap() {
                emitted.push(o);
            }
        }
        assert_eq!(emitted.len(), 2);
        assert_eq!(b.pending(), 5);
        assert!((emitted[0].values[0] - 0.095).abs() < 1e-12);
        assert!((emitted[1].values[0] - 0.295).abs() < 1e-12);
    }

    #[test]
    fn reward_examples() {
        assert_eq!(reward(&[0.0; 24]), 0.0);
        assert_eq!(reward(&[1.0; 24]), 24.0);
        let mut v = [0.0; 24];
        v[3] = 0.5;
        assert_eq!(reward(&v), 0.5);
    }
}
