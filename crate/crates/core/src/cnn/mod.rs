//! Shallow regression CNN for the BM3D threshold multiplier.
//!
//! Input pixels are scaled by 1/255 and average-pooled 2x2. Four blocks
//! follow, each a depthwise 3x3 convolution (zero "same" padding), a
//! pointwise 1x1 convolution with bias, ReLU and 2x2 max pooling, taking the
//! feature count through 1 -> 8 -> 16 -> 32 -> 64. The head averages the last
//! volume over every position and channel into one scalar.

use std::path::PathBuf;

use thiserror::Error;

mod adam;
mod io;
pub mod layers;
mod model;
mod train;

pub use adam::{adam_step, AdamState};
pub use io::{decode_model, encode_model, load_model, save_model, FORMAT_VERSION, MAGIC};
pub use layers::FeatureMap;
pub use model::{
    loss, loss_grad, xavier_limit, CnnModel, ForwardCache, Gradients, SeparableBlock, CHANNEL_PLAN, MIN_INPUT_SIDE,
};
pub use train::{train, train_examples, TrainOutcome};

#[derive(Debug, Error)]
pub enum CnnError {
    #[error("input {width}x{height} is smaller than 32x32")]
    InputTooSmall { width: usize, height: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no training examples at sigma {0}")]
    NoExamples(f64),
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("model file truncated")]
    Truncated,
    #[error("{0} unexpected trailing bytes in model file")]
    TrailingBytes(usize),
    #[error("model checksum mismatch (stored {stored:08x}, computed {actual:08x})")]
    ChecksumMismatch { stored: u32, actual: u32 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Image(#[from] crate::image::ImageError),
}

/// Adam hyperparameters and seeds for one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    /// Only 1 is supported; kept so runs record it explicitly.
    pub batch_size: usize,
    pub shuffle_seed: u64,
    pub init_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 50,
            batch_size: 1,
            shuffle_seed: 0,
            init_seed: 0,
        }
    }
}
