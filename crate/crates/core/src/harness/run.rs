use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::pla::{load_checkpoint, save_checkpoint, Ddpg, PlaAgent, ACTION_DIM};

use super::config::{derive_seed, LoadedConfig, Mode};
use super::las_env::{JsonlWriter, LasEnv, LasSim, SimSetup};
use super::schedule::{plan, Slot};
use super::HarnessError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotStatus {
    Completed,
    Failed,
}

/// Files produced by one slot, relative to the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub day: u32,
    pub index: u32,
    pub mode: Mode,
    pub start: f64,
    pub end: f64,
    pub status: SlotStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub ir_log: String,
    pub activation_log: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition_log: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_log: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

/// One saved agent and the checkpoint it continued from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointLink {
    pub day: u32,
    pub path: String,
    pub sha256: String,
    pub parent_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config_hash: String,
    pub code_version: String,
    pub topology: String,
    pub node_count: usize,
    pub slots: Vec<SlotRecord>,
    pub checkpoints: Vec<CheckpointLink>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Read(path.to_path_buf(), e))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn store(&self, run_dir: &Path) -> Result<(), HarnessError> {
        let path = run_dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| HarnessError::Write(path, e))
    }
}

pub fn file_sha256(path: &Path) -> Result<String, HarnessError> {
    let bytes = fs::read(path).map_err(|e| HarnessError::Read(path.to_path_buf(), e))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// Executes every planned slot (optionally only those of one mode) in order,
/// writing logs, checkpoints and `manifest.json` under `out_root/run_id`.
/// A failing slot is recorded as failed, the manifest is written, and the
/// error is returned.
pub fn run(loaded: &LoadedConfig, out_root: &Path, only: Option<Mode>) -> Result<RunManifest, HarnessError> {
    let config = &loaded.config;
    let run_dir = out_root.join(&config.run_id);
    fs::create_dir_all(&run_dir).map_err(|e| HarnessError::Write(run_dir.clone(), e))?;
    let mut manifest = RunManifest {
        run_id: config.run_id.clone(),
        config_hash: loaded.hash(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        topology: loaded.topology.fingerprint(),
        node_count: loaded.topology.node_count(),
        slots: Vec::new(),
        checkpoints: Vec::new(),
    };
    for slot in plan(config).into_iter().filter(|s| only.is_none_or(|m| s.mode == m)) {
        let mut record = SlotRecord {
            day: slot.day,
            index: slot.index,
            mode: slot.mode,
            start: slot.start,
            end: slot.end,
            status: SlotStatus::Completed,
            error: None,
            ir_log: format!("{}.jsonl", slot.log_stem()),
            activation_log: format!("{}.activations.jsonl", slot.log_stem()),
            transition_log: None,
            noise_log: None,
            checkpoint: None,
        };
        let outcome = match slot.mode {
            Mode::Pb => run_pb_slot(loaded, &slot, &run_dir, &record),
            Mode::Pla => run_pla_slot(loaded, &slot, &run_dir, &mut record, &mut manifest.checkpoints),
        };
        if let Err(e) = outcome {
            record.status = SlotStatus::Failed;
            record.error = Some(e.to_string());
            manifest.slots.push(record);
            manifest.store(&run_dir)?;
            return Err(HarnessError::SlotFailed { day: slot.day, index: slot.index, source: Box::new(e) });
        }
        manifest.slots.push(record);
    }
    manifest.store(&run_dir)?;
    Ok(manifest)
}

fn open_sim(loaded: &LoadedConfig, slot: &Slot, run_dir: &Path, record: &SlotRecord) -> Result<LasSim, HarnessError> {
    let seeds = &loaded.config.seeds;
    let path = [u64::from(slot.day), u64::from(slot.index)];
    let setup = SimSetup {
        topology: &loaded.topology,
        sensors: loaded.sensor_model()?,
        sma_cooldown: loaded.config.sma_cooldown.0,
        params: loaded.params,
        arrivals: loaded.scenario.arrivals_between(slot.start, slot.end),
        sim_seed: derive_seed(seeds.sim, &path),
        engine_seed: derive_seed(seeds.sim, &[path[0], path[1], 1]),
        visitor_seed: derive_seed(seeds.visitors, &path),
        start: slot.start,
        end: slot.end,
    };
    let ir = JsonlWriter::create(&run_dir.join(&record.ir_log))?;
    let acts = JsonlWriter::create(&run_dir.join(&record.activation_log))?;
    Ok(LasSim::new(setup, ir, acts))
}

fn run_pb_slot(loaded: &LoadedConfig, slot: &Slot, run_dir: &Path, record: &SlotRecord) -> Result<(), HarnessError> {
    let mut sim = open_sim(loaded, slot, run_dir, record)?;
    while sim.remaining_ticks() > 0 {
        sim.tick()?;
    }
    sim.finish()
}

fn run_pla_slot(
    loaded: &LoadedConfig,
    slot: &Slot,
    run_dir: &Path,
    record: &mut SlotRecord,
    lineage: &mut Vec<CheckpointLink>,
) -> Result<(), HarnessError> {
    let stem = slot.log_stem();
    record.transition_log = Some(format!("{stem}.transitions.jsonl"));
    record.noise_log = Some(format!("{stem}.noise.jsonl"));
    let agent_config = loaded.config.agent.clone();
    let obs_dim = loaded.topology.node_count();
    let agent_seed = derive_seed(loaded.config.seeds.agent, &[u64::from(slot.day), u64::from(slot.index)]);

    let parent = lineage.last().cloned();
    let mut ddpg = match &parent {
        None => Ddpg::new(agent_config, obs_dim, ACTION_DIM, agent_seed)?,
        Some(link) => {
            let path = run_dir.join(&link.path);
            let actual = file_sha256(&path)?;
            if actual != link.sha256 {
                return Err(HarnessError::Lineage(format!("{} changed since it was written", link.path)));
            }
            load_checkpoint(&path, agent_config, obs_dim, ACTION_DIM, agent_seed)?
        }
    };
    ddpg.reseed(agent_seed);
    ddpg.start_day();
    let mut agent = PlaAgent::new(ddpg);

    let mut env = LasEnv::new(open_sim(loaded, slot, run_dir, record)?);
    let mut transitions = JsonlWriter::create(&run_dir.join(record.transition_log.as_ref().expect("set")))?;
    let mut noise = JsonlWriter::create(&run_dir.join(record.noise_log.as_ref().expect("set")))?;
    let ticks_per_step = crate::pla::FRAMES_PER_OBSERVATION as u64;
    let episode_length = agent.ddpg.config().episode_length;
    loop {
        // one window for the first observation, one per step after that
        let pending = u64::from(agent.current_obs().is_none());
        let steps = (env.sim.remaining_ticks() / ticks_per_step).saturating_sub(pending) as usize;
        if steps == 0 {
            break;
        }
        let log = agent.run_episode(&mut env, steps.min(episode_length))?;
        for t in &log.transitions {
            transitions.write(t)?;
        }
        for n in &log.noise {
            noise.write(n)?;
        }
    }
    while env.sim.remaining_ticks() > 0 {
        env.sim.tick()?;
    }
    env.sim.finish()?;
    transitions.finish()?;
    noise.finish()?;

    let name = format!("day_{}.ckpt", slot.day);
    let path = run_dir.join(&name);
    save_checkpoint(&agent.ddpg, &path)?;
    lineage.push(CheckpointLink {
        day: slot.day,
        path: name.clone(),
        sha256: file_sha256(&path)?,
        parent_sha256: parent.map(|p| p.sha256),
    });
    record.checkpoint = Some(name);
    Ok(())
}

/// Run directory of a manifest path.
pub fn run_dir_of(manifest_path: &Path) -> PathBuf {
    manifest_path.parent().map(Path::to_path_buf).unwrap_or_default()
}
