use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::sculpture::IrFrame;

use super::MetricsError;

/// Readings at or above this count as an active interaction (about 35 cm).
pub const ACTIVE_THRESHOLD: f64 = 0.25;
/// IR sampling rate of the sculpture.
pub const SAMPLE_RATE_HZ: f64 = 10.0;

/// Frames sharing one clock minute.
#[derive(Debug, Clone, PartialEq)]
pub struct MinuteWindow {
    pub minute_start: f64,
    pub frames: Vec<IrFrame>,
    pub sample_rate: f64,
}

/// Buckets frames by `floor(t / 60)`. Buckets come out in time order and the
/// last one may be partial. Minutes without frames are skipped.
pub fn minute_windows(frames: &[IrFrame], sample_rate: f64) -> Vec<MinuteWindow> {
    let mut out: Vec<MinuteWindow> = Vec::new();
    let mut sorted: Vec<&IrFrame> = frames.iter().collect();
    sorted.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    for f in sorted {
        let start = (f.timestamp / 60.0).floor() * 60.0;
        match out.last_mut() {
            Some(w) if w.minute_start == start => w.frames.push(f.clone()),
            _ => out.push(MinuteWindow { minute_start: start, frames: vec![f.clone()], sample_rate }),
        }
    }
    out
}

/// Mean of every reading in the window.
pub fn engagement(window: &MinuteWindow) -> Result<f64, MetricsError> {
    if window.frames.is_empty() {
        return Err(MetricsError::EmptyWindow);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for f in &window.frames {
        sum += f.readings.iter().sum::<f64>();
        count += f.readings.len();
    }
    if count == 0 {
        return Err(MetricsError::EmptyWindow);
    }
    Ok(sum / count as f64)
}

/// Seconds of sensor-level active interaction: readings at or above the
/// threshold, divided by the sample rate.
pub fn active_count(window: &MinuteWindow) -> Result<f64, MetricsError> {
    if !(window.sample_rate > 0.0) {
        return Err(MetricsError::SampleRate(window.sample_rate));
    }
    if window.frames.is_empty() {
        return Err(MetricsError::EmptyWindow);
    }
    let hits = window.frames.iter().flat_map(|f| &f.readings).filter(|&&r| r >= ACTIVE_THRESHOLD).count();
    Ok(hits as f64 / window.sample_rate)
}

/// One row of the per-minute metrics table. The calibrated columns are
/// empty when no calibration profile was given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinuteRow {
    pub day: u32,
    pub minute_start: f64,
    pub mode: String,
    pub e: f64,
    pub n_active: f64,
    pub e_calibrated: Option<f64>,
    pub n_active_calibrated: Option<f64>,
}

pub fn write_minute_csv<W: Write>(mut out: W, rows: &[MinuteRow]) -> Result<(), MetricsError> {
    writeln!(out, "day,minute_start,mode,e,n_active,e_calibrated,n_active_calibrated")?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.day,
            r.minute_start,
            r.mode,
            r.e,
            r.n_active,
            opt(r.e_calibrated),
            opt(r.n_active_calibrated)
        )?;
    }
    Ok(())
}
