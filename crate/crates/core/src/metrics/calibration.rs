use serde::{Deserialize, Serialize};

use crate::sculpture::IrFrame;

use super::MetricsError;

/// A sensor is blocked when its idle reading is high...
pub const BLOCKED_MIN_MEAN: f64 = 0.5;
/// ...and barely moves.
pub const BLOCKED_MAX_STD: f64 = 0.005;

/// Per-sensor corrections estimated from a period without visitors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProfile {
    pub blocked_sensors: Vec<usize>,
    pub baseline_offsets: Vec<f64>,
    pub no_visitor_window: (f64, f64),
}

impl CalibrationProfile {
    /// Profile that changes nothing.
    pub fn identity(sensors: usize) -> Self {
        Self { blocked_sensors: Vec::new(), baseline_offsets: vec![0.0; sensors], no_visitor_window: (0.0, 0.0) }
    }

    /// Estimates offsets and blocked sensors from the frames whose
    /// timestamps fall inside `[start, end]`.
    pub fn from_window(frames: &[IrFrame], start: f64, end: f64) -> Result<Self, MetricsError> {
        let idle: Vec<&IrFrame> = frames.iter().filter(|f| f.timestamp >= start && f.timestamp <= end).collect();
        let first = idle.first().ok_or(MetricsError::EmptyCalibrationWindow { start, end })?;
        let n = first.readings.len();
        if let Some(f) = idle.iter().find(|f| f.readings.len() != n) {
            return Err(MetricsError::SensorCount { profile: n, frame: f.readings.len() });
        }
        let m = idle.len() as f64;
        let mut mean = vec![0.0; n];
        for f in &idle {
            for (acc, r) in mean.iter_mut().zip(&f.readings) {
                *acc += r;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m);
        let mut var = vec![0.0; n];
        for f in &idle {
            for ((acc, r), mu) in var.iter_mut().zip(&f.readings).zip(&mean) {
                *acc += (r - mu) * (r - mu);
            }
        }
        let blocked_sensors = (0..n)
            .filter(|&i| (var[i] / m).sqrt() < BLOCKED_MAX_STD && mean[i] > BLOCKED_MIN_MEAN)
            .collect();
        Ok(Self { blocked_sensors, baseline_offsets: mean, no_visitor_window: (start, end) })
    }

    pub fn sensor_count(&self) -> usize {
        self.baseline_offsets.len()
    }

    /// Sensors that survive calibration, in ascending order.
    pub fn kept_sensors(&self) -> Vec<usize> {
        (0..self.sensor_count()).filter(|i| !self.blocked_sensors.contains(i)).collect()
    }
}

/// Drops blocked sensors and shifts every remaining reading by its baseline,
/// clamping into `[0, 1]`. Output frames list the kept sensors in order.
pub fn calibrate(frames: &[IrFrame], profile: &CalibrationProfile) -> Result<Vec<IrFrame>, MetricsError> {
    let kept = profile.kept_sensors();
    frames
        .iter()
        .map(|f| {
            if f.readings.len() != profile.sensor_count() {
                return Err(MetricsError::SensorCount { profile: profile.sensor_count(), frame: f.readings.len() });
            }
            let readings = kept
                .iter()
                .map(|&i| (f.readings[i] - profile.baseline_offsets[i]).clamp(0.0, 1.0))
                .collect();
            Ok(IrFrame { timestamp: f.timestamp, readings })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(n: usize, f: impl Fn(usize, usize) -> f64) -> Vec<IrFrame> {
        (0..n).map(|k| IrFrame { timestamp: k as f64 * 0.1, readings: (0..4).map(|i| f(k, i)).collect() }).collect()
    }

    #[test]
    fn identity_profile_changes_nothing() {
        let fs = frames(10, |k, i| (k * i) as f64 / 40.0);
        assert_eq!(calibrate(&fs, &CalibrationProfile::identity(4)).unwrap(), fs);
    }

    #[test]
    fn constant_offset_is_removed() {
        let fs = frames(50, |k, i| if i == 1 { 0.3 } else { 0.01 * (k % 3) as f64 });
        let p = CalibrationProfile::from_window(&fs, 0.0, 10.0).unwrap();
        assert!((p.baseline_offsets[1] - 0.3).abs() < 1e-12);
        assert!(p.blocked_sensors.is_empty());
        let out = calibrate(&fs, &p).unwrap();
        assert!(out.iter().all(|f| f.readings[1].abs() < 1e-12));
    }

    #[test]
    fn stuck_high_sensor_is_removed() {
        let fs = frames(50, |k, i| if i == 2 { 0.9 } else { 0.02 * (k % 2) as f64 });
        let p = CalibrationProfile::from_window(&fs, 0.0, 10.0).unwrap();
        assert_eq!(p.blocked_sensors, vec![2]);
        let out = calibrate(&fs, &p).unwrap();
        assert!(out.iter().all(|f| f.readings.len() == 3));
    }

    #[test]
    fn mismatched_frames_are_rejected() {
        let p = CalibrationProfile::identity(5);
        assert!(matches!(calibrate(&frames(2, |_, _| 0.0), &p), Err(MetricsError::SensorCount { .. })));
        assert!(CalibrationProfile::from_window(&frames(2, |_, _| 0.0), 50.0, 60.0).is_err());
    }
}
