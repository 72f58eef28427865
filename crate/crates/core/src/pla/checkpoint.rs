//! Agent checkpoints: actor, critic, both targets, both Adam states and the
//! noise state, in the binary network encoding.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::io::{CheckpointReader, CheckpointWriter};
use crate::nn::NnError;

use super::ddpg::{Ddpg, DdpgConfig};
use super::noise::NoiseState;
use super::PlaError;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LASPLA\0\x01";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(agent: &Ddpg, out: W) -> Result<W, PlaError> {
    let mut w = CheckpointWriter::new(out, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    w.net(&agent.actor)?;
    w.net(&agent.critic)?;
    w.net(&agent.target_actor)?;
    w.net(&agent.target_critic)?;
    w.adam(&agent.actor_adam)?;
    w.adam(&agent.critic_adam)?;
    w.f64(agent.noise.sigma)?;
    w.f64(agent.noise.alpha)?;
    w.f64(agent.noise.delta)?;
    Ok(w.finish()?)
}

/// Restores an agent whose networks must match the shapes implied by
/// `config`, `obs_dim` and `action_dim`. Nothing is returned unless the
/// whole file parses.
pub fn read_checkpoint<R: Read>(
    input: R,
    config: DdpgConfig,
    obs_dim: usize,
    action_dim: usize,
    seed: u64,
) -> Result<Ddpg, PlaError> {
    config.validate()?;
    let actor_arch = config.actor_architecture(obs_dim, action_dim)?;
    let critic_arch = config.critic_architecture(obs_dim, action_dim)?;
    let mut r = CheckpointReader::new(input, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    let actor = r.net(&actor_arch)?;
    let critic = r.net(&critic_arch)?;
    let target_actor = r.net(&actor_arch)?;
    let target_critic = r.net(&critic_arch)?;
    let actor_adam = r.adam(actor_arch.param_count())?;
    let critic_adam = r.adam(critic_arch.param_count())?;
    let noise = NoiseState { sigma: r.f64()?, alpha: r.f64()?, delta: r.f64()? };
    r.finish()?;
    if !(noise.sigma > 0.0 && noise.alpha > 0.0 && noise.delta > 0.0) {
        return Err(NnError::Checkpoint("noise state must be positive".into()).into());
    }
    Ok(Ddpg::assemble(
        config,
        actor,
        critic,
        Some((target_actor, target_critic, actor_adam, critic_adam, noise)),
        ChaCha8Rng::seed_from_u64(seed),
    ))
}

pub fn save_checkpoint(agent: &Ddpg, path: &Path) -> Result<(), PlaError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let out = write_checkpoint(agent, BufWriter::new(fs::File::create(path)?))?;
    out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    Ok(())
}

pub fn load_checkpoint(
    path: &Path,
    config: DdpgConfig,
    obs_dim: usize,
    action_dim: usize,
    seed: u64,
) -> Result<Ddpg, PlaError> {
    read_checkpoint(BufReader::new(fs::File::open(path)?), config, obs_dim, action_dim, seed)
}
