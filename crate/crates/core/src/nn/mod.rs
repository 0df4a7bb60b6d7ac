//! Dense feed-forward networks with exact backpropagation, Adam, and
//! spectral-norm estimates of their Lipschitz constant.
//!
//! All arithmetic is `f64`. Weight matrices are stored `out x in`, so a batch
//! `X` (`batch x in`) maps to `X W^T + b`.

mod adam;
mod io;
mod mlp;
mod spectral;

use thiserror::Error;

pub use adam::{AdamConfig, AdamState};
pub use io::{MlpRecord, MLP_MAGIC};
pub use mlp::{mlp_init, ForwardCache, Head, Layer, MlpParams};
pub use spectral::{
    input_lipschitz_bounds, spectral_norm, spectral_norm_seeded, value_lipschitz_bound,
    SPECTRAL_MAX_ITERS, SPECTRAL_TOL,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NnError {
    #[error("a network needs at least an input and an output size, got {0:?}")]
    TooFewLayers(Vec<usize>),
    #[error("layer sizes must be positive, got {0:?}")]
    ZeroWidth(Vec<usize>),
    #[error("layer {layer}: weight is {rows}x{cols} but the previous layer outputs {expected}")]
    ShapeMismatch {
        layer: usize,
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("parameter file is malformed: {0}")]
    Malformed(String),
}
