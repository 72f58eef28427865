use serde::{Deserialize, Serialize};

use super::buffer::{ReplayBuffer, Transition};
use super::ddpg::Ddpg;
use super::observation::reward;
use super::PlaError;

/// Episodic environment driven by the agent.
pub trait Environment {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Current observation, used when the agent has none yet.
    fn observe(&mut self) -> Result<Vec<f64>, PlaError>;
    /// Applies `action` and advances to the next observation.
    fn step(&mut self, action: &[f64]) -> Result<Vec<f64>, PlaError>;
    /// Simulated time in seconds.
    fn time(&self) -> f64;
    /// Start-of-episode hook. Returns true when the environment was reset,
    /// making the carried-over observation stale. The default does nothing,
    /// so an episode continues from where the previous one stopped.
    fn begin_episode(&mut self) -> Result<bool, PlaError> {
        Ok(false)
    }
}

/// One line of the transition log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub t: f64,
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub sigma: f64,
}

/// One line of the noise-adaptation log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub t: f64,
    pub update: u64,
    pub distance: f64,
    pub delta: f64,
    pub sigma_before: f64,
    pub sigma_after: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub transitions: Vec<TransitionRecord>,
    pub noise: Vec<NoiseRecord>,
    pub bursts: usize,
    pub updates: usize,
    pub total_reward: f64,
    pub first_obs: Vec<f64>,
    pub last_next_obs: Vec<f64>,
}

impl EpisodeLog {
    pub fn mean_reward(&self) -> f64 {
        if self.transitions.is_empty() {
            0.0
        } else {
            self.total_reward / self.transitions.len() as f64
        }
    }
}

/// Learner plus its replay memory and the observation it will act on next.
#[derive(Debug, Clone)]
pub struct PlaAgent {
    pub ddpg: Ddpg,
    pub buffer: ReplayBuffer,
    current_obs: Option<Vec<f64>>,
    updates: u64,
    pub keep_transition_log: bool,
}

impl PlaAgent {
    pub fn new(ddpg: Ddpg) -> Self {
        let capacity = ddpg.config().buffer_size;
        Self { ddpg, buffer: ReplayBuffer::new(capacity), current_obs: None, updates: 0, keep_transition_log: true }
    }

    pub fn current_obs(&self) -> Option<&[f64]> {
        self.current_obs.as_deref()
    }

    /// Forgets the carried-over observation.
    pub fn clear_observation(&mut self) {
        self.current_obs = None;
    }

    /// Total gradient updates applied since construction.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Runs `length` interactions, training `train_times` times every
    /// `train_interval` interactions. The first observation is the last
    /// `next_obs` of the previous episode when there was one. On an
    /// environment error the episode stops; transitions already stored stay
    /// in the buffer.
    pub fn run_episode<E: Environment + ?Sized>(&mut self, env: &mut E, length: usize) -> Result<EpisodeLog, PlaError> {
        if env.obs_dim() != self.ddpg.obs_dim() {
            return Err(PlaError::Dimension { what: "observation", got: env.obs_dim(), expected: self.ddpg.obs_dim() });
        }
        if env.action_dim() != self.ddpg.action_dim() {
            return Err(PlaError::Dimension { what: "action", got: env.action_dim(), expected: self.ddpg.action_dim() });
        }
        if env.begin_episode()? {
            self.current_obs = None;
        }
        let mut obs = match self.current_obs.take() {
            Some(o) => o,
            None => env.observe()?,
        };
        let (interval, times) = (self.ddpg.config().train_interval, self.ddpg.config().train_times);
        let delta = self.ddpg.noise().delta;
        let mut log = EpisodeLog { first_obs: obs.clone(), ..EpisodeLog::default() };
        self.ddpg.resample_exploration();

        for step in 0..length {
            let t = env.time();
            let action = self.ddpg.act(&obs)?;
            let next_obs = match env.step(&action) {
                Ok(o) => o,
                Err(e) => {
                    self.current_obs = Some(obs);
                    return Err(e);
                }
            };
            if next_obs.len() != self.ddpg.obs_dim() {
                self.current_obs = Some(obs);
                return Err(PlaError::Dimension { what: "observation", got: next_obs.len(), expected: self.ddpg.obs_dim() });
            }
            let r = reward(&next_obs);
            log.total_reward += r;
            if self.keep_transition_log {
                log.transitions.push(TransitionRecord {
                    t,
                    obs: obs.clone(),
                    action: action.clone(),
                    reward: r,
                    sigma: self.ddpg.noise().sigma,
                });
            } else {
                log.transitions.push(TransitionRecord { t, obs: Vec::new(), action: Vec::new(), reward: r, sigma: self.ddpg.noise().sigma });
            }
            self.buffer.push(Transition { obs, action, reward: r, next_obs: next_obs.clone() });
            obs = next_obs;

            if (step + 1) % interval == 0 {
                log.bursts += 1;
                let mut trained = false;
                for _ in 0..times {
                    if let Some(stats) = self.ddpg.train_step(&self.buffer)? {
                        self.updates += 1;
                        log.updates += 1;
                        trained = true;
                        log.noise.push(NoiseRecord {
                            t: env.time(),
                            update: self.updates,
                            distance: stats.noise.distance,
                            delta,
                            sigma_before: stats.noise.sigma_before,
                            sigma_after: stats.noise.sigma_after,
                        });
                    }
                }
                if trained {
                    self.ddpg.resample_exploration();
                }
            }
        }
        log.last_next_obs = obs.clone();
        self.current_obs = Some(obs);
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pla::ddpg::DdpgConfig;

    /// Observation is a decaying echo of the action magnitudes.
    struct Echo {
        state: Vec<f64>,
        t: f64,
        fail_at: Option<usize>,
        steps: usize,
    }

    impl Environment for Echo {
        fn obs_dim(&self) -> usize {
            3
        }
        fn action_dim(&self) -> usize {
            2
        }
        fn observe(&mut self) -> Result<Vec<f64>, PlaError> {
            Ok(self.state.clone())
        }
        fn step(&mut self, action: &[f64]) -> Result<Vec<f64>, PlaError> {
            if self.fail_at == Some(self.steps) {
                return Err(PlaError::Env("sensor bus lost".into()));
            }
            self.steps += 1;
            self.t += 2.0;
            self.state = vec![action[0].abs() * 0.5, action[1].abs() * 0.5, self.state[0] * 0.5];
            Ok(self.state.clone())
        }
        fn time(&self) -> f64 {
            self.t
        }
    }

    fn agent() -> PlaAgent {
        let config = DdpgConfig { hidden: vec![8, 8], batch_size: 16, ..DdpgConfig::default() };
        PlaAgent::new(Ddpg::new(config, 3, 2, 3).unwrap())
    }

    fn echo() -> Echo {
        Echo { state: vec![0.1, 0.2, 0.3], t: 0.0, fail_at: None, steps: 0 }
    }

    #[test]
    fn episode_has_fixed_length_and_burst_count() {
        let mut a = agent();
        let log = a.run_episode(&mut echo(), 100).unwrap();
        assert_eq!(log.transitions.len(), 100);
        assert_eq!(a.buffer.len(), 100);
        assert_eq!(log.bursts, 10);
        // the first burst with at least 16 transitions is at step 20
        assert_eq!(log.updates, 9 * 20);
        for r in &log.transitions {
            assert!((0.0..=3.0).contains(&r.reward));
        }
    }

    #[test]
    fn next_episode_starts_from_last_next_obs() {
        let mut a = agent();
        let mut env = echo();
        let first = a.run_episode(&mut env, 100).unwrap();
        env.state = vec![9.0; 3];
        let second = a.run_episode(&mut env, 100).unwrap();
        assert_eq!(second.first_obs, first.last_next_obs);
        assert_eq!(second.transitions[0].obs, first.last_next_obs);
    }

    #[test]
    fn failure_aborts_but_keeps_buffer() {
        let mut a = agent();
        let mut env = Echo { fail_at: Some(37), ..echo() };
        assert!(matches!(a.run_episode(&mut env, 100), Err(PlaError::Env(_))));
        assert_eq!(a.buffer.len(), 37);
    }

    #[test]
    fn reward_matches_sum_of_next_observation() {
        let mut a = agent();
        let log = a.run_episode(&mut echo(), 30).unwrap();
        for pair in log.transitions.windows(2) {
            let s: f64 = pair[1].obs.iter().sum();
            assert_eq!(pair[0].reward, s);
        }
    }
}
