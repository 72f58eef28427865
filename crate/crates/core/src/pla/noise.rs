use ndarray::ArrayView2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::nn::{DenseNet, NnError};

/// Adaptive scale of the Gaussian perturbation applied to actor parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseState {
    pub sigma: f64,
    /// Multiplicative adaptation factor.
    pub alpha: f64,
    /// Target distance in action space.
    pub delta: f64,
}

/// One adaptation of the noise scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseAdaptation {
    pub distance: f64,
    pub sigma_before: f64,
    pub sigma_after: f64,
}

impl Default for NoiseState {
    fn default() -> Self {
        Self { sigma: 0.1, alpha: 1.01, delta: 0.1 }
    }
}

impl NoiseState {
    /// Grows `sigma` by `alpha` when the perturbed policy stayed within
    /// `delta` of the clean one, shrinks it by `alpha` otherwise.
    pub fn adapt(&mut self, distance: f64) -> NoiseAdaptation {
        let before = self.sigma;
        self.sigma = if distance <= self.delta { before * self.alpha } else { before / self.alpha };
        NoiseAdaptation { distance, sigma_before: before, sigma_after: self.sigma }
    }
}

/// Copy of `actor` with i.i.d. `N(0, sigma²)` added to every parameter,
/// layer-norm gains and offsets included.
pub fn perturbed_copy<R: Rng + ?Sized>(actor: &DenseNet, sigma: f64, rng: &mut R) -> DenseNet {
    let mut p = actor.clone();
    for w in p.params_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *w += sigma * z;
    }
    p
}

/// Root-mean-square difference between two policies over a batch of
/// observations, averaged across samples and action dimensions.
pub fn action_distance(
    actor: &DenseNet,
    perturbed: &DenseNet,
    obs: ArrayView2<'_, f64>,
) -> Result<f64, NnError> {
    let a = actor.forward_batch(obs)?;
    let b = perturbed.forward_batch(obs)?;
    let mse = (&a - &b).mapv(|d| d * d).mean().unwrap_or(0.0);
    Ok(mse.sqrt())
}
