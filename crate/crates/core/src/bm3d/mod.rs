//! Deterministic two-stage BM3D.
//!
//! Stage one groups similar blocks of the noisy image, hard-thresholds the 3D
//! spectrum of each group at `lambda_3d * sigma`, and aggregates the
//! overlapping block estimates. Stage two regroups on the basic estimate and
//! applies empirical Wiener shrinkage to the noisy groups.

use thiserror::Error;

mod matching;
mod profile;
mod stages;
mod transform;

pub use matching::{block_match, BlockMatch, BlockPos};
pub use profile::{Bm3dProfile, DEFAULT_LAMBDA_3D};
pub use stages::{denoise, hard_threshold, kaiser_window, stage1_hard, stage2_wiener, BlockGroup};
pub use transform::{dct2, haar1, idct2, ihaar1, Dct2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Hard-thresholding stage, matched on the noisy image.
    Hard,
    /// Wiener stage, matched on the basic estimate.
    Wiener,
}

#[derive(Debug, Error)]
pub enum Bm3dError {
    #[error("invalid BM3D profile: {0}")]
    InvalidProfile(String),
    #[error("block has {found} values, expected {expected}")]
    WrongBlockSize { expected: usize, found: usize },
    #[error("group length {0} is not a power of two in 1..=32")]
    BadGroupLength(usize),
    #[error("image {width}x{height} smaller than block size {block}")]
    ImageTooSmall { width: usize, height: usize, block: usize },
    #[error("reference block at {0:?} not fully inside image")]
    OutOfBounds(BlockPos),
    #[error("sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error(transparent)]
    Image(#[from] crate::image::ImageError),
}
