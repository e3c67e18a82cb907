//! Side-by-side evaluation of BM3D with a predicted threshold multiplier
//! against the default one.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::bm3d::{denoise, Bm3dError, Bm3dProfile, DEFAULT_LAMBDA_3D};
use crate::cnn::{CnnError, CnnModel};
use crate::dataset::{DatasetError, DatasetManifest};
use crate::image::{load_image, ImageError, MetricTriple};
use crate::report::format_sig;

pub const EVAL_CSV_HEADER: &str = "image,sigma,lambda_pred,mse_pred,psnr_pred,ssim_pred,mse_def,psnr_def,ssim_def";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no manifest records at sigma {0}")]
    NoRecords(f64),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Bm3d(#[from] Bm3dError),
    #[error(transparent)]
    Cnn(#[from] CnnError),
}

/// Where the per-image threshold multiplier comes from.
#[derive(Debug, Clone, Copy)]
pub enum LambdaSource<'a> {
    /// The CNN's raw prediction from the noisy image.
    Model(&'a CnnModel),
    /// The sweep label stored in the manifest.
    Oracle,
    /// The same value for every image.
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub image: String,
    pub sigma: f64,
    pub lambda_pred: f64,
    pub predicted: MetricTriple,
    pub default: MetricTriple,
}

/// Column means over a set of [`EvalRecord`]s. Each metric is averaged per
/// image, so the PSNR column is the mean of per-image PSNRs rather than the
/// PSNR of the mean MSE.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub sigma: f64,
    pub count: usize,
    pub lambda_pred: f64,
    pub predicted: MetricTriple,
    pub default: MetricTriple,
}

/// Evaluates every manifest record at `sigma`, in manifest order. Both
/// denoisers use `profile` and differ only in `lambda_3d`.
pub fn evaluate(
    manifest: &DatasetManifest,
    sigma: f64,
    source: LambdaSource<'_>,
    profile: &Bm3dProfile,
) -> Result<Vec<EvalRecord>, HarnessError> {
    let records: Vec<_> = manifest.at_sigma(sigma).collect();
    if records.is_empty() {
        return Err(HarnessError::NoRecords(sigma));
    }
    records
        .par_iter()
        .map(|rec| {
            let ex = manifest.example(rec);
            let clean = load_image(&ex.clean_path)?;
            let noisy = load_image(&ex.noisy_path)?;
            let lambda_pred = match source {
                LambdaSource::Model(m) => m.predict(&noisy)?,
                LambdaSource::Oracle => rec.lambda_star,
                LambdaSource::Constant(v) => v,
            };
            let pred_img = denoise(&noisy, sigma, lambda_pred, profile)?;
            let def_img = denoise(&noisy, sigma, DEFAULT_LAMBDA_3D, profile)?;
            Ok(EvalRecord {
                image: rec.image_id(),
                sigma: rec.sigma,
                lambda_pred,
                predicted: MetricTriple::compute(&pred_img, &clean)?,
                default: MetricTriple::compute(&def_img, &clean)?,
            })
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn mean_triple<'a>(triples: impl Iterator<Item = &'a MetricTriple> + Clone) -> MetricTriple {
    MetricTriple {
        mse: mean(triples.clone().map(|t| t.mse)),
        psnr: mean(triples.clone().map(|t| t.psnr)),
        ssim: mean(triples.map(|t| t.ssim)),
    }
}

/// Per-image column means; `None` for an empty slice.
pub fn summarize(records: &[EvalRecord]) -> Option<EvalSummary> {
    let first = records.first()?;
    Some(EvalSummary {
        sigma: first.sigma,
        count: records.len(),
        lambda_pred: mean(records.iter().map(|r| r.lambda_pred)),
        predicted: mean_triple(records.iter().map(|r| &r.predicted)),
        default: mean_triple(records.iter().map(|r| &r.default)),
    })
}

fn push_row(out: &mut String, image: &str, sigma: f64, lambda: f64, p: &MetricTriple, d: &MetricTriple) {
    let f = |v: f64| format_sig(v, 8);
    let _ = writeln!(
        out,
        "{image},{sigma},{},{},{},{},{},{},{}",
        f(lambda),
        f(p.mse),
        f(p.psnr),
        f(p.ssim),
        f(d.mse),
        f(d.psnr),
        f(d.ssim)
    );
}

/// One row per image followed by a `mean` row holding the summary.
pub fn evaluation_csv(records: &[EvalRecord]) -> String {
    let mut out = String::from(EVAL_CSV_HEADER);
    out.push('\n');
    for r in records {
        push_row(&mut out, &r.image, r.sigma, r.lambda_pred, &r.predicted, &r.default);
    }
    if let Some(s) = summarize(records) {
        push_row(&mut out, "mean", s.sigma, s.lambda_pred, &s.predicted, &s.default);
    }
    out
}

/// Text table with the MSE, PSNR and SSIM means for predicted and default
/// multipliers side by side.
pub fn summary_table(summary: &EvalSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "sigma = {}  ({} images, mean lambda_pred = {:.4})",
        summary.sigma, summary.count, summary.lambda_pred
    );
    let _ = writeln!(out, "{:<6}{:>14}{:>14}", "", "Predicted", "Default");
    let rows = [
        ("MSE", summary.predicted.mse, summary.default.mse, 2),
        ("PSNR", summary.predicted.psnr, summary.default.psnr, 2),
        ("SSIM", summary.predicted.ssim, summary.default.ssim, 4),
    ];
    for (name, p, d, prec) in rows {
        let _ = writeln!(out, "{name:<6}{p:>14.prec$}{d:>14.prec$}");
    }
    out
}
