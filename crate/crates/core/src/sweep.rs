//! Grid sweep of the hard-threshold multiplier and the MSE-optimal label.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bm3d::{denoise, Bm3dError, Bm3dProfile};
use crate::image::{mse, Image};
use crate::report::format_sig;

/// Uniform grid `start + i * step` for `i in 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl Default for LambdaGrid {
    /// `[1.0, 1.125, ..., 3.0]`
    fn default() -> Self {
        Self { start: 1.0, step: 0.125, count: 17 }
    }
}

impl LambdaGrid {
    pub fn value(&self, index: usize) -> f64 {
        self.start + index as f64 * self.step
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.count).map(|i| self.value(i))
    }

    /// Index of the grid point equal to `lambda` within 1e-9.
    pub fn index_of(&self, lambda: f64) -> Option<usize> {
        (0..self.count).find(|&i| (self.value(i) - lambda).abs() < 1e-9)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub grid: LambdaGrid,
    pub mses: Vec<f64>,
    pub lambda_star: f64,
    pub mse_star: f64,
}

impl SweepResult {
    /// Labels an MSE curve with its first (smallest-lambda) minimum.
    pub fn from_mses(grid: LambdaGrid, mses: Vec<f64>) -> Self {
        assert_eq!(mses.len(), grid.count, "one MSE per grid point");
        let best = argmin_first(&mses);
        Self { grid, lambda_star: grid.value(best), mse_star: mses[best], mses }
    }

    pub fn argmin_index(&self) -> usize {
        argmin_first(&self.mses)
    }

    /// `lambda,mse` CSV with one row per grid point.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("lambda,mse\n");
        for (lambda, mse) in self.grid.values().zip(&self.mses) {
            writeln!(out, "{lambda:.3},{}", format_sig(*mse, 6)).unwrap();
        }
        out
    }
}

/// Index of the smallest value; ties go to the lowest index.
pub(crate) fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Denoises `noisy` at every grid value and scores each result against `clean`.
pub fn sweep_lambdas(
    clean: &Image,
    noisy: &Image,
    sigma: f64,
    grid: &LambdaGrid,
    profile: &Bm3dProfile,
) -> Result<SweepResult, Bm3dError> {
    clean.ensure_same_dims(noisy)?;
    let mses = (0..grid.count)
        .into_par_iter()
        .map(|i| {
            let out = denoise(noisy, sigma, grid.value(i), profile)?;
            Ok(mse(&out, clean)?)
        })
        .collect::<Result<Vec<f64>, Bm3dError>>()?;
    Ok(SweepResult::from_mses(*grid, mses))
}

pub fn emit_curve(sweep: &SweepResult, path: impl AsRef<Path>) -> std::io::Result<()> {
    fs::write(path, sweep.curve_csv())
}
