//! BM3D denoising with a learned hard-threshold multiplier.
//!
//! The pipeline: corrupt clean images with seeded AWGN, sweep BM3D's
//! `lambda_3d` over a fixed grid to find the MSE-optimal value per image,
//! train a small separable-convolution CNN to regress that value from the
//! noisy image alone, and compare denoising quality with predicted versus
//! default `lambda_3d`.

pub mod bm3d;
pub mod cnn;
pub mod dataset;
pub mod harness;
pub mod image;
pub mod report;
pub mod sweep;
