use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Replay capacity used by the agent.
pub const REPLAY_CAPACITY: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
}

/// Minibatch laid out one transition per row.
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_obs: Array2<f64>,
}

/// Fixed-capacity FIFO of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: Vec<Transition>,
    next: usize,
    inserted: u64,
    evicted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, storage: Vec::new(), next: 0, inserted: 0, evicted: 0 }
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn evicted(&self) -> u64 {
        self.evicted
    }

    /// Appends, overwriting the oldest transition once full.
    pub fn push(&mut self, t: Transition) {
        self.inserted += 1;
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.next] = t;
            self.evicted += 1;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Transitions from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() < self.capacity { 0 } else { self.next };
        self.storage[split..].iter().chain(self.storage[..split].iter())
    }

    /// Uniform sample of `n` transitions, with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Batch> {
        let first = self.storage.first()?;
        let (od, ad) = (first.obs.len(), first.action.len());
        let mut obs = Array2::zeros((n, od));
        let mut actions = Array2::zeros((n, ad));
        let mut rewards = Array1::zeros(n);
        let mut next_obs = Array2::zeros((n, od));
        for row in 0..n {
            let t = &self.storage[rng.random_range(0..self.storage.len())];
            for (j, v) in t.obs.iter().enumerate() {
                obs[[row, j]] = *v;
            }
            for (j, v) in t.action.iter().enumerate() {
                actions[[row, j]] = *v;
            }
            rewards[row] = t.reward;
            for (j, v) in t.next_obs.iter().enumerate() {
                next_obs[[row, j]] = *v;
            }
        }
        Some(Batch { obs, actions, rewards, next_obs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(k: usize) -> Transition {
        Transition { obs: vec![k as f64], action: vec![0.0], reward: k as f64, next_obs: vec![k as f64 + 1.0] }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut b = ReplayBuffer::new(3);
        for k in 0..5 {
            b.push(t(k));
        }
        assert_eq!(b.len(), 3);
        let kept: Vec<f64> = b.iter_oldest_first().map(|t| t.reward).collect();
        assert_eq!(kept, vec![2.0, 3.0, 4.0]);
        assert_eq!(b.inserted() - b.evicted(), 3);
    }

    #[test]
    fn sample_shapes() {
        let mut b = ReplayBuffer::new(10);
        assert!(b.sample(4, &mut ChaCha8Rng::seed_from_u64(0)).is_none());
        for k in 0..5 {
            b.push(t(k));
        }
        let s = b.sample(8, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(s.obs.dim(), (8, 1));
        assert_eq!(s.rewards.len(), 8);
        for r in 0..8 {
            assert_eq!(s.next_obs[[r, 0]], s.obs[[r, 0]] + 1.0);
        }
    }
}
