use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::pb::{default_params, ParamVector};
use crate::pla::DdpgConfig;
use crate::sculpture::{IrSensorModel, NodeTopology};
use crate::units::Seconds;
use crate::visitors::VisitorScenario;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Pb,
    Pla,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Pb => "pb",
            Mode::Pla => "pla",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub sim: u64,
    pub agent: u64,
    pub visitors: u64,
}

impl Seeds {
    /// Three independent seeds derived from one number.
    pub fn from_base(base: u64) -> Self {
        Self { sim: derive_seed(base, &[1]), agent: derive_seed(base, &[2]), visitors: derive_seed(base, &[3]) }
    }
}

/// SplitMix64 mixing of a base seed with a path of integers.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut x = base;
    for &p in path {
        x ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(x << 6).wrapping_add(x >> 2);
        x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x = z ^ (z >> 31);
    }
    x
}

/// A slot given explicitly in the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotSpec {
    pub day: u32,
    pub mode: Mode,
    pub duration: Seconds,
}

/// Slots generated by a seeded permutation of the modes on every day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub days: u32,
    pub modes: Vec<Mode>,
    pub slot_duration: Seconds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    #[serde(default = "default_half_angle")]
    pub half_angle_deg: f64,
    #[serde(default)]
    pub noise_std: f64,
    /// Per-sensor offsets; empty means zero.
    #[serde(default)]
    pub baseline: Vec<f64>,
}

fn default_half_angle() -> f64 {
    30.0
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self { half_angle_deg: default_half_angle(), noise_std: 0.0, baseline: Vec::new() }
    }
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run_id: String,
    pub seeds: Seeds,
    #[serde(default = "default_day_length")]
    pub day_length: Seconds,
    #[serde(default)]
    pub slots: Vec<SlotSpec>,
    #[serde(default)]
    pub schedule: Option<ScheduleSpec>,
    /// Topology file; the canonical 4x6 grid when absent.
    #[serde(default)]
    pub topology: Option<PathBuf>,
    /// Visitor scenario file; mutually exclusive with `visitors`.
    #[serde(default)]
    pub visitor_scenario: Option<PathBuf>,
    #[serde(default)]
    pub visitors: Option<VisitorScenario>,
    #[serde(default)]
    pub sensors: SensorSpec,
    #[serde(default = "default_sma_cooldown")]
    pub sma_cooldown: Seconds,
    /// Behaviour parameter overrides by name.
    #[serde(default)]
    pub pb_params: BTreeMap<String, f64>,
    #[serde(default)]
    pub agent: DdpgConfig,
    /// Where outputs go unless overridden on the command line.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_day_length() -> Seconds {
    Seconds(3.0 * 3600.0)
}

fn default_sma_cooldown() -> Seconds {
    Seconds(crate::sculpture::SMA_COOLDOWN_S)
}

/// A parsed config together with the bytes it came from and its resolved
/// external files.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub bytes: Vec<u8>,
    pub topology: NodeTopology,
    pub scenario: VisitorScenario,
    pub params: ParamVector,
}

impl LoadedConfig {
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(&self.bytes))
    }

    pub fn sensor_model(&self) -> Result<IrSensorModel, HarnessError> {
        let n = self.topology.node_count();
        let s = &self.config.sensors;
        let baseline = match s.baseline.len() {
            0 => vec![0.0; n],
            k if k == n => s.baseline.clone(),
            k => return Err(HarnessError::Config(format!("sensor baseline has {k} entries for {n} sensors"))),
        };
        Ok(IrSensorModel { half_angle_deg: s.half_angle_deg, baseline, noise_std: s.noise_std })
    }
}

impl RunConfig {
    /// Parses and validates a config; relative file references resolve
    /// against `base_dir`.
    pub fn load_str(text: &str, base_dir: &Path) -> Result<LoadedConfig, HarnessError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
        let topology = match &config.topology {
            Some(p) => {
                let path = resolve(p);
                if !path.exists() {
                    return Err(HarnessError::MissingFile(path));
                }
                NodeTopology::load(&path)?
            }
            None => NodeTopology::canonical(),
        };
        let scenario = match (&config.visitor_scenario, &config.visitors) {
            (Some(_), Some(_)) => {
                return Err(HarnessError::Config("give either visitor_scenario or [visitors], not both".into()))
            }
            (Some(p), None) => {
                let path = resolve(p);
                if !path.exists() {
                    return Err(HarnessError::MissingFile(path));
                }
                VisitorScenario::load(&path)?
            }
            (None, Some(v)) => {
                v.validate()?;
                v.clone()
            }
            (None, None) => VisitorScenario::default(),
        };
        let params = default_params().with_overrides(config.pb_params.iter().map(|(k, v)| (k.as_str(), *v)))?;
        let loaded = LoadedConfig { config, bytes: text.as_bytes().to_vec(), topology, scenario, params };
        loaded.sensor_model()?;
        Ok(loaded)
    }

    pub fn load(path: &Path) -> Result<LoadedConfig, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Read(path.to_path_buf(), e))?;
        Self::load_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) || self.run_id.starts_with('.') {
            return bad("run_id must be a plain, non-empty name");
        }
        if self.day_length.0 <= 0.0 {
            return bad("day_length must be positive");
        }
        match (&self.schedule, self.slots.is_empty()) {
            (Some(_), false) => return bad("give either [schedule] or [[slots]], not both"),
            (None, true) => return bad("the run needs a [schedule] or at least one [[slots]] entry"),
            _ => {}
        }
        if let Some(s) = &self.schedule {
            if s.days == 0 || s.modes.is_empty() {
                return bad("schedule needs at least one day and one mode");
            }
            if s.slot_duration.0 <= 0.0 {
                return bad("slot durations must be positive");
            }
            if s.slot_duration.0 * s.modes.len() as f64 > self.day_length.0 {
                return bad("a day's slots exceed day_length");
            }
        }
        for w in self.slots.windows(2) {
            if w[1].day < w[0].day {
                return bad("slots must be listed in day order");
            }
        }
        let mut per_day: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
        for s in &self.slots {
            if s.day == 0 {
                return bad("days are numbered from 1");
            }
            if s.duration.0 <= 0.0 {
                return bad("slot durations must be positive");
            }
            let e = per_day.entry(s.day).or_default();
            e.0 += s.duration.0;
            e.1 += usize::from(s.mode == Mode::Pla);
            if e.0 > self.day_length.0 + 1e-9 {
                return bad("a day's slots exceed day_length");
            }
            if e.1 > 1 {
                return bad("at most one PLA slot per day, since checkpoints are kept per day");
            }
        }
        if self.schedule.as_ref().is_some_and(|s| s.modes.iter().filter(|&&m| m == Mode::Pla).count() > 1) {
            return bad("at most one PLA slot per day, since checkpoints are kept per day");
        }
        self.agent.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        run_id = "t"
        [seeds]
        sim = 1
        agent = 2
        visitors = 3
        [[slots]]
        day = 1
        mode = "pb"
        duration = "10min"
    "#;

    #[test]
    fn minimal_config_loads() {
        let c = RunConfig::load_str(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(c.config.slots[0].duration, Seconds(600.0));
        assert_eq!(c.topology.node_count(), 24);
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn unknown_keys_fail() {
        let text = format!("{MINIMAL}\ncolour = 1");
        assert!(RunConfig::load_str(&text, Path::new(".")).is_err());
    }

    #[test]
    fn durations_need_units() {
        let text = MINIMAL.replace("\"10min\"", "\"600\"");
        assert!(RunConfig::load_str(&text, Path::new(".")).is_err());
    }

    #[test]
    fn missing_files_fail_at_load() {
        let text = format!("topology = \"no/such/file.toml\"\n{MINIMAL}");
        assert!(matches!(RunConfig::load_str(&text, Path::new("/tmp")), Err(HarnessError::MissingFile(_))));
    }

    #[test]
    fn two_pla_slots_on_one_day_fail() {
        let text = format!("{MINIMAL}\n[[slots]]\nday = 1\nmode = \"pla\"\nduration = \"1min\"\n[[slots]]\nday = 1\nmode = \"pla\"\nduration = \"1min\"\n");
        assert!(RunConfig::load_str(&text, Path::new(".")).is_err());
    }

    #[test]
    fn bad_param_override_fails() {
        let text = format!("{MINIMAL}\n[pb_params]\ni_max = 150.0\n");
        assert!(RunConfig::load_str(&text, Path::new(".")).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let s = Seeds::from_base(5);
        assert_ne!(s.sim, s.agent);
        assert_ne!(derive_seed(1, &[1, 2]), derive_seed(1, &[2, 1]));
    }
}
