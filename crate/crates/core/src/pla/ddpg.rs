//! Deep deterministic policy gradient with adaptive parameter-space noise.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{soft_update, Activation, AdamConfig, AdamState, Architecture, DenseNet, NnError};

use super::buffer::{Batch, ReplayBuffer, REPLAY_CAPACITY};
use super::noise::{perturbed_copy, NoiseAdaptation, NoiseState};
use super::PlaError;

/// Learning hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub buffer_size: usize,
    pub train_interval: usize,
    pub train_times: usize,
    pub episode_length: usize,
    pub noise_alpha: f64,
    pub noise_delta: f64,
    pub initial_sigma: f64,
    pub tau: f64,
    pub hidden: Vec<usize>,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            gamma: 0.99,
            batch_size: 64,
            buffer_size: REPLAY_CAPACITY,
            train_interval: 10,
            train_times: 20,
            episode_length: 100,
            noise_alpha: 1.01,
            noise_delta: 0.1,
            initial_sigma: 0.1,
            tau: 0.001,
            hidden: vec![64, 64],
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<(), PlaError> {
        let bad = |what: &str| Err(PlaError::Config(what.to_string()));
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0,1]");
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad("tau must lie in [0,1]");
        }
        if self.batch_size == 0 || self.buffer_size == 0 || self.train_interval == 0 || self.episode_length == 0 {
            return bad("batch size, buffer size, train interval and episode length must be positive");
        }
        if !(self.noise_alpha > 1.0 && self.noise_delta > 0.0 && self.initial_sigma > 0.0) {
            return bad("noise alpha must exceed 1; delta and initial sigma must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layers must be non-empty");
        }
        Ok(())
    }

    pub fn actor_architecture(&self, obs_dim: usize, action_dim: usize) -> Result<Architecture, NnError> {
        Architecture::mlp(obs_dim, &self.hidden, action_dim, Activation::Tanh)
    }

    /// The critic sees observation and action concatenated at its input.
    pub fn critic_architecture(&self, obs_dim: usize, action_dim: usize) -> Result<Architecture, NnError> {
        Architecture::mlp(obs_dim + action_dim, &self.hidden, 1, Activation::Identity)
    }
}

/// Diagnostics from one gradient update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub critic_loss: f64,
    pub mean_q: f64,
    pub noise: NoiseAdaptation,
}

/// Actor, critic, their targets, optimisers and exploration state.
#[derive(Debug, Clone)]
pub struct Ddpg {
    pub(crate) config: DdpgConfig,
    pub(crate) obs_dim: usize,
    pub(crate) action_dim: usize,
    pub(crate) actor: DenseNet,
    pub(crate) critic: DenseNet,
    pub(crate) target_actor: DenseNet,
    pub(crate) target_critic: DenseNet,
    pub(crate) actor_adam: AdamState,
    pub(crate) critic_adam: AdamState,
    pub(crate) noise: NoiseState,
    exploration_actor: Option<DenseNet>,
    rng: ChaCha8Rng,
}

impl Ddpg {
    /// Fresh agent with random networks and targets equal to them.
    pub fn new(config: DdpgConfig, obs_dim: usize, action_dim: usize, seed: u64) -> Result<Self, PlaError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = DenseNet::random(config.actor_architecture(obs_dim, action_dim)?, &mut rng);
        let critic = DenseNet::random(config.critic_architecture(obs_dim, action_dim)?, &mut rng);
        Ok(Self::assemble(config, actor, critic, None, rng))
    }

    pub(crate) fn assemble(
        config: DdpgConfig,
        actor: DenseNet,
        critic: DenseNet,
        restored: Option<(DenseNet, DenseNet, AdamState, AdamState, NoiseState)>,
        rng: ChaCha8Rng,
    ) -> Self {
        let obs_dim = actor.input_dim();
        let action_dim = actor.output_dim();
        let (target_actor, target_critic, actor_adam, critic_adam, noise) = match restored {
            Some(parts) => parts,
            None => (
                actor.clone(),
                critic.clone(),
                AdamState::for_net(&actor, AdamConfig::with_learning_rate(config.actor_lr)),
                AdamState::for_net(&critic, AdamConfig::with_learning_rate(config.critic_lr)),
                NoiseState { sigma: config.initial_sigma, alpha: config.noise_alpha, delta: config.noise_delta },
            ),
        };
        Self {
            config,
            obs_dim,
            action_dim,
            actor,
            critic,
            target_actor,
            target_critic,
            actor_adam,
            critic_adam,
            noise,
            exploration_actor: None,
            rng,
        }
    }

    pub fn config(&self) -> &DdpgConfig {
        &self.config
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn actor(&self) -> &DenseNet {
        &self.actor
    }

    pub fn critic(&self) -> &DenseNet {
        &self.critic
    }

    pub fn target_actor(&self) -> &DenseNet {
        &self.target_actor
    }

    pub fn target_critic(&self) -> &DenseNet {
        &self.target_critic
    }

    pub fn noise(&self) -> NoiseState {
        self.noise
    }

    /// Re-seeds the agent's random stream, e.g. at the start of a day.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.exploration_actor = None;
    }

    /// Day start: targets copy the live networks and the noise scale resets.
    pub fn start_day(&mut self) {
        self.target_actor = self.actor.clone();
        self.target_critic = self.critic.clone();
        self.noise.sigma = self.config.initial_sigma;
        self.resample_exploration();
    }

    /// Draws a fresh perturbation of the actor at the current noise scale.
    pub fn resample_exploration(&mut self) {
        self.exploration_actor = Some(perturbed_copy(&self.actor, self.noise.sigma, &mut self.rng));
    }

    /// Action of the unperturbed actor.
    pub fn greedy_action(&self, obs: &[f64]) -> Result<Vec<f64>, PlaError> {
        Ok(self.actor.forward(obs)?)
    }

    /// Exploratory action from the perturbed actor. The live actor is left
    /// untouched.
    pub fn act(&mut self, obs: &[f64]) -> Result<Vec<f64>, PlaError> {
        if self.exploration_actor.is_none() {
            self.resample_exploration();
        }
        let net = self.exploration_actor.as_ref().expect("exploration actor present");
        Ok(net.forward(obs)?.into_iter().map(|a| a.clamp(-1.0, 1.0)).collect())
    }

    /// One noise adaptation, one critic update, one actor update and a soft
    /// update of both targets. Returns `None` while the buffer holds fewer
    /// than a minibatch of transitions.
    pub fn train_step(&mut self, buffer: &ReplayBuffer) -> Result<Option<TrainStats>, PlaError> {
        let n = self.config.batch_size;
        if buffer.len() < n {
            return Ok(None);
        }
        let batch = buffer.sample(n, &mut self.rng).expect("non-empty buffer");
        let stats = self.update(&batch)?;
        Ok(Some(stats))
    }

    /// Gradient updates on an explicit minibatch.
    pub fn update(&mut self, batch: &Batch) -> Result<TrainStats, PlaError> {
        let n = batch.obs.nrows() as f64;

        let policy_actions = self.actor.forward_train(batch.obs.view())?;
        let probe = perturbed_copy(&self.actor, self.noise.sigma, &mut self.rng);
        let probe_actions = probe.forward_batch(batch.obs.view())?;
        let distance = (&policy_actions - &probe_actions).mapv(|d| d * d).mean().unwrap_or(0.0).sqrt();
        let noise = self.noise.adapt(distance);

        let y = td_targets(
            &self.target_actor,
            &self.target_critic,
            batch.rewards.view(),
            batch.next_obs.view(),
            self.config.gamma,
        )?;

        let q = self.critic.forward_train(concat(batch.obs.view(), batch.actions.view()).view())?;
        let q = q.column(0).to_owned();
        let err = &q - &y;
        let critic_loss = err.mapv(|e| e * e).sum() / n;
        let dq = (err * (2.0 / n)).insert_axis(Axis(1));
        let back = self.critic.backward(dq.view())?;
        self.critic.adam_step(&back.grads, &mut self.critic_adam)?;

        let q_pi = self.critic.forward_train(concat(batch.obs.view(), policy_actions.view()).view())?;
        let mean_q = q_pi.sum() / n;
        let ascend = Array2::from_elem((batch.obs.nrows(), 1), -1.0 / n);
        let critic_back = self.critic.backward_input(ascend.view())?;
        let actor_back = self.actor.backward(critic_back.input_grad.slice(s![.., self.obs_dim..]))?;
        self.actor.adam_step(&actor_back.grads, &mut self.actor_adam)?;

        soft_update(&mut self.target_critic, &self.critic, self.config.tau)?;
        soft_update(&mut self.target_actor, &self.actor, self.config.tau)?;

        Ok(TrainStats { critic_loss, mean_q, noise })
    }
}

/// Bellman targets `r + γ Q⁻(s', μ⁻(s'))`. Only target networks are passed
/// in, so live networks cannot leak into the targets.
pub fn td_targets(
    target_actor: &DenseNet,
    target_critic: &DenseNet,
    rewards: ArrayView1<'_, f64>,
    next_obs: ArrayView2<'_, f64>,
    gamma: f64,
) -> Result<Array1<f64>, NnError> {
    let next_actions = target_actor.forward_batch(next_obs)?;
    let q_next = target_critic.forward_batch(concat(next_obs, next_actions.view()).view())?;
    Ok(&rewards + &(q_next.column(0).to_owned() * gamma))
}

fn concat(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[a, b]).expect("matching row counts")
}
