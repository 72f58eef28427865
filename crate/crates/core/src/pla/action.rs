use serde::{Deserialize, Serialize};

use crate::pb::{default_params, Param, ParamVector};

use super::PlaError;

/// Dimension of the parameterised action.
pub const ACTION_DIM: usize = Param::LEARNED.len();

/// Normalised action in `[-1,1]^11`, ordered as [`Param::LEARNED`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaAction {
    pub normalized: [f64; ACTION_DIM],
}

impl PlaAction {
    /// Builds an action, clipping every component into `[-1,1]`.
    pub fn from_slice(values: &[f64]) -> Result<Self, PlaError> {
        if values.len() != ACTION_DIM {
            return Err(PlaError::Dimension { what: "action", got: values.len(), expected: ACTION_DIM });
        }
        let mut normalized = [0.0; ACTION_DIM];
        for (n, v) in normalized.iter_mut().zip(values) {
            *n = if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
        }
        Ok(Self { normalized })
    }
}

/// Affine map of `[-1,1]` onto `[lo, hi]`.
pub fn denormalize(x: f64, (lo, hi): (f64, f64)) -> f64 {
    if x <= -1.0 {
        lo
    } else if x >= 1.0 {
        hi
    } else {
        lo + (x + 1.0) * 0.5 * (hi - lo)
    }
}

/// Inverse of [`denormalize`].
pub fn normalize(v: f64, (lo, hi): (f64, f64)) -> f64 {
    2.0 * (v - lo) / (hi - lo) - 1.0
}

/// Behaviour parameters selected by `action`; parameters outside the action
/// keep their designer defaults.
pub fn scale_action(action: &PlaAction) -> ParamVector {
    let mut params = default_params();
    for (p, &x) in Param::LEARNED.iter().zip(&action.normalized) {
        params.set(*p, denormalize(x, p.range()));
    }
    params
}

/// Normalised coordinates of the learned parameters of `params`. Values
/// outside a range map outside `[-1,1]`.
pub fn normalize_params(params: &ParamVector) -> [f64; ACTION_DIM] {
    Param::LEARNED.map(|p| normalize(params.get(p), p.range()))
}
