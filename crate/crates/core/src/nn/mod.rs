//! Dense networks with layer normalisation, reverse-mode gradients, Adam and
//! a bit-exact binary checkpoint encoding. All arithmetic is `f64`.

mod adam;
mod dense;
pub mod io;

pub use adam::{AdamConfig, AdamState};
pub use dense::{
    normalize, soft_update, Activation, Architecture, Backward, DenseNet, LayerSpec,
    FINAL_LAYER_INIT, LAYER_NORM_EPS,
};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite network input")]
    NonFiniteInput,
    #[error("non-finite gradient at {path}")]
    NonFiniteGradient { path: String },
    #[error("backward called without a cached forward pass")]
    NoForwardCache,
    #[error("checkpoint architecture {found} does not match expected {expected}")]
    ArchitectureMismatch { expected: String, found: String },
    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
