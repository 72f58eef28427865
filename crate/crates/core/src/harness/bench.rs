use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::pla::{Ddpg, DdpgConfig, PlaAgent, PlaError};
use crate::visitors::{oracle_reward, SimplifiedEnv, VisitorError};

/// Settings of the brightest-LED convergence benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub cells: usize,
    pub visitors: usize,
    pub episodes: usize,
    pub steps_per_episode: usize,
    /// Episodes at the end whose mean reward is scored.
    pub scored_episodes: usize,
    /// Fraction of the oracle reward a seed must reach.
    pub target_fraction: f64,
    pub agent: DdpgConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            cells: 24,
            visitors: 2,
            episodes: 100,
            steps_per_episode: 1000,
            scored_episodes: 10,
            target_fraction: 0.9,
            agent: DdpgConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub episode_rewards: Vec<f64>,
    pub final_mean: f64,
    pub oracle: f64,
    pub converged: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Visitor(#[from] VisitorError),
    #[error(transparent)]
    Pla(#[from] PlaError),
    #[error("invalid benchmark: {0}")]
    Config(String),
}

/// Trains one agent from scratch and scores its last episodes against the
/// oracle. `on_episode` sees every finished episode's mean reward.
pub fn run_bench_seed(
    config: &BenchConfig,
    seed: u64,
    mut on_episode: impl FnMut(usize, f64),
) -> Result<SeedOutcome, BenchError> {
    if config.scored_episodes == 0 || config.scored_episodes > config.episodes {
        return Err(BenchError::Config("scored episodes must lie in 1..=episodes".into()));
    }
    let oracle = oracle_reward(config.cells, config.visitors)?;
    let mut env = SimplifiedEnv::with_respawn(config.cells, config.visitors, seed.wrapping_mul(0x9e37_79b9).wrapping_add(1))?;
    let ddpg = Ddpg::new(config.agent.clone(), config.cells, config.cells, seed)?;
    let mut agent = PlaAgent::new(ddpg);
    agent.keep_transition_log = false;
    agent.ddpg.start_day();
    let mut episode_rewards = Vec::with_capacity(config.episodes);
    for e in 0..config.episodes {
        let log = agent.run_episode(&mut env, config.steps_per_episode)?;
        let mean = log.mean_reward();
        on_episode(e, mean);
        episode_rewards.push(mean);
    }
    let tail = &episode_rewards[config.episodes - config.scored_episodes..];
    let final_mean = tail.iter().sum::<f64>() / tail.len() as f64;
    Ok(SeedOutcome {
        seed,
        converged: final_mean >= config.target_fraction * oracle,
        episode_rewards,
        final_mean,
        oracle,
    })
}

/// Runs every seed, in parallel when threads are available.
pub fn run_bench(config: &BenchConfig, seeds: &[u64]) -> Result<Vec<SeedOutcome>, BenchError> {
    seeds.par_iter().map(|&s| run_bench_seed(config, s, |_, _| {})).collect()
}
