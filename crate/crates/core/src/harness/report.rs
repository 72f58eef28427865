use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{qq_table, write_qq_csv, QqPoint};
use crate::metrics::{
    active_count, calibrate, engagement, mann_whitney_u, minute_windows, write_minute_csv, CalibrationProfile,
    MannWhitney, MinuteRow, SAMPLE_RATE_HZ,
};
use crate::sculpture::{read_frames_jsonl, IrFrame};

use super::config::Mode;
use super::run::{RunManifest, SlotStatus};
use super::HarnessError;

/// Mean and standard error of one metric for one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mode: Mode,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub mode_a: Mode,
    pub mode_b: Mode,
    pub test: MannWhitney,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRow {
    pub day: u32,
    pub mode: Mode,
    pub e: f64,
    pub n_active: f64,
    pub e_calibrated: Option<f64>,
    pub n_active_calibrated: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QqComparison {
    pub metric: String,
    pub mode_a: Mode,
    pub mode_b: Mode,
    pub table: Vec<QqPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub minutes: Vec<MinuteRow>,
    pub summary: Vec<SummaryRow>,
    pub comparisons: Vec<ComparisonRow>,
    pub qq: Vec<QqComparison>,
    pub daily: Vec<DailyRow>,
    pub calibration: Option<CalibrationProfile>,
}

/// A manifest and the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub manifest: RunManifest,
    pub dir: PathBuf,
}

impl LoadedRun {
    pub fn load(manifest_path: &Path) -> Result<Self, HarnessError> {
        Ok(Self { manifest: RunManifest::load(manifest_path)?, dir: super::run::run_dir_of(manifest_path) })
    }
}

struct SlotFrames {
    day: u32,
    mode: Mode,
    frames: Vec<IrFrame>,
}

fn read_slots(runs: &[LoadedRun]) -> Result<Vec<SlotFrames>, HarnessError> {
    let mut out = Vec::new();
    for run in runs {
        for slot in run.manifest.slots.iter().filter(|s| s.status == SlotStatus::Completed) {
            let path = run.dir.join(&slot.ir_log);
            let file = File::open(&path).map_err(|e| HarnessError::Read(path.clone(), e))?;
            out.push(SlotFrames { day: slot.day, mode: slot.mode, frames: read_frames_jsonl(BufReader::new(file))? });
        }
    }
    Ok(out)
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-minute metrics of every completed slot, summarised per mode, compared
/// between modes and averaged per day. With `calibration_window`, a profile
/// is estimated from the frames inside it and calibrated columns are filled.
pub fn report(runs: &[LoadedRun], calibration_window: Option<(f64, f64)>) -> Result<Report, HarnessError> {
    let first = runs.first().ok_or_else(|| HarnessError::Config("report needs at least one manifest".into()))?;
    if let Some(other) = runs.iter().find(|r| r.manifest.topology != first.manifest.topology) {
        return Err(HarnessError::MixedTopologies {
            first: first.manifest.run_id.clone(),
            other: other.manifest.run_id.clone(),
        });
    }
    let slots = read_slots(runs)?;
    let calibration = match calibration_window {
        Some((start, end)) => {
            let all: Vec<IrFrame> = slots.iter().flat_map(|s| s.frames.iter().cloned()).collect();
            Some(CalibrationProfile::from_window(&all, start, end)?)
        }
        None => None,
    };

    let mut minutes = Vec::new();
    for slot in &slots {
        let raw = minute_windows(&slot.frames, SAMPLE_RATE_HZ);
        let calibrated = match &calibration {
            Some(p) => Some(minute_windows(&calibrate(&slot.frames, p)?, SAMPLE_RATE_HZ)),
            None => None,
        };
        for (k, w) in raw.iter().enumerate() {
            let cal = calibrated.as_ref().map(|c| &c[k]);
            minutes.push(MinuteRow {
                day: slot.day,
                minute_start: w.minute_start,
                mode: slot.mode.to_string(),
                e: engagement(w)?,
                n_active: active_count(w)?,
                e_calibrated: cal.map(engagement).transpose()?,
                n_active_calibrated: cal.map(active_count).transpose()?,
            });
        }
    }

    type Extract = fn(&MinuteRow) -> Option<f64>;
    let mut metrics: Vec<(&str, Extract)> = vec![("e", |r| Some(r.e)), ("n_active", |r| Some(r.n_active))];
    if calibration.is_some() {
        metrics.push(("e_calibrated", |r| r.e_calibrated));
        metrics.push(("n_active_calibrated", |r| r.n_active_calibrated));
    }
    let mut by_mode: BTreeMap<Mode, Vec<&MinuteRow>> = BTreeMap::new();
    for (slot_rows, mode) in minutes.iter().map(|r| (r, r.mode.as_str())) {
        let m = if mode == "pb" { Mode::Pb } else { Mode::Pla };
        by_mode.entry(m).or_default().push(slot_rows);
    }

    let mut summary = Vec::new();
    for (&mode, rows) in &by_mode {
        for (name, f) in &metrics {
            let values: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
            let (mean, se) = mean_se(&values);
            summary.push(SummaryRow { mode, metric: name.to_string(), n: values.len(), mean, se });
        }
    }

    let mut comparisons = Vec::new();
    let mut qq = Vec::new();
    let modes: Vec<Mode> = by_mode.keys().copied().collect();
    for (i, &a) in modes.iter().enumerate() {
        for &b in &modes[i + 1..] {
            for (name, f) in &metrics {
                let va: Vec<f64> = by_mode[&a].iter().filter_map(|r| f(r)).collect();
                let vb: Vec<f64> = by_mode[&b].iter().filter_map(|r| f(r)).collect();
                comparisons.push(ComparisonRow {
                    metric: name.to_string(),
                    mode_a: a,
                    mode_b: b,
                    test: mann_whitney_u(&va, &vb)?,
                });
                qq.push(QqComparison {
                    metric: name.to_string(),
                    mode_a: a,
                    mode_b: b,
                    table: qq_table(&va, &vb)?,
                });
            }
        }
    }

    let mut per_day: BTreeMap<(Mode, u32), Vec<&MinuteRow>> = BTreeMap::new();
    for (&mode, rows) in &by_mode {
        for r in rows {
            per_day.entry((mode, r.day)).or_default().push(r);
        }
    }
    let daily = per_day
        .into_iter()
        .map(|((mode, day), rows)| {
            let avg = |f: Extract| {
                let v: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            DailyRow {
                day,
                mode,
                e: avg(|r| Some(r.e)).unwrap_or(0.0),
                n_active: avg(|r| Some(r.n_active)).unwrap_or(0.0),
                e_calibrated: avg(|r| r.e_calibrated),
                n_active_calibrated: avg(|r| r.n_active_calibrated),
            }
        })
        .collect();

    Ok(Report { minutes, summary, comparisons, qq, daily, calibration })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, HarnessError> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).map_err(|e| HarnessError::Write(path, e))?))
}

/// Writes `minutes.csv`, `summary.csv`, `mann_whitney.csv`, `daily.csv` and
/// one `qq_<metric>_<a>_vs_<b>.csv` per comparison into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::Write(dir.to_path_buf(), e))?;
    let mut written = Vec::new();

    let mut out = create(dir, "minutes.csv")?;
    write_minute_csv(&mut out, &report.minutes)?;
    out.flush()?;
    written.push(dir.join("minutes.csv"));

    let mut out = create(dir, "summary.csv")?;
    writeln!(out, "mode,metric,n,mean,se")?;
    for r in &report.summary {
        writeln!(out, "{},{},{},{},{}", r.mode, r.metric, r.n, r.mean, r.se)?;
    }
    out.flush()?;
    written.push(dir.join("summary.csv"));

    let mut out = create(dir, "mann_whitney.csv")?;
    writeln!(out, "metric,mode_a,mode_b,u_a,u_b,p_two_sided,method")?;
    for c in &report.comparisons {
        let method = serde_json::to_value(c.test.method)?;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.metric,
            c.mode_a,
            c.mode_b,
            c.test.u_a,
            c.test.u_b,
            c.test.p_two_sided,
            method.as_str().unwrap_or_default()
        )?;
    }
    out.flush()?;
    written.push(dir.join("mann_whitney.csv"));

    let mut out = create(dir, "daily.csv")?;
    writeln!(out, "day,mode,e,n_active,e_calibrated,n_active_calibrated")?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &report.daily {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.day,
            r.mode,
            r.e,
            r.n_active,
            opt(r.e_calibrated),
            opt(r.n_active_calibrated)
        )?;
    }
    out.flush()?;
    written.push(dir.join("daily.csv"));

    for q in &report.qq {
        let name = format!("qq_{}_{}_vs_{}.csv", q.metric, q.mode_a, q.mode_b);
        let mut out = create(dir, &name)?;
        write_qq_csv(&mut out, &q.mode_a.to_string(), &q.mode_b.to_string(), &q.table)?;
        out.flush()?;
        written.push(dir.join(name));
    }

    if let Some(p) = &report.calibration {
        let path = dir.join("calibration.json");
        fs::write(&path, serde_json::to_string_pretty(p)? + "\n").map_err(|e| HarnessError::Write(path.clone(), e))?;
        written.push(path);
    }
    Ok(written)
}
