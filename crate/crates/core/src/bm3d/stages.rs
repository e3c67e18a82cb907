use rayon::prelude::*;

use crate::image::Image;

use super::matching::{match_raw, BlockPos};
use super::transform::{haar_along_group, inverse_3d, Dct2};
use super::{Bm3dError, Bm3dProfile};

/// Reference blocks per parallel batch. Batches are aggregated in order, so
/// the result does not depend on the thread count.
const BATCH: usize = 64;

/// A group of matched blocks and its block-major coefficient or pixel stack
/// (`stack[g * bs² + row * bs + col]`).
#[derive(Debug, Clone)]
pub struct BlockGroup {
    /// Reference block first.
    pub positions: Vec<BlockPos>,
    pub stack: Vec<f64>,
}

impl BlockGroup {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Zeroes every coefficient with `|c| < threshold` except the DC term at
/// index 0. Returns the number of nonzero coefficients left, counting the DC
/// term even when it is zero.
pub fn hard_threshold(stack: &mut [f64], threshold: f64) -> usize {
    let Some((_, rest)) = stack.split_first_mut() else {
        return 0;
    };
    let mut retained = 1;
    for c in rest {
        if c.abs() < threshold {
            *c = 0.0;
        } else if *c != 0.0 {
            retained += 1;
        }
    }
    retained
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// 2D separable Kaiser window of side `n`, row-major.
pub fn kaiser_window(n: usize, beta: f64) -> Vec<f64> {
    let w1: Vec<f64> = (0..n)
        .map(|i| {
            if n == 1 {
                return 1.0;
            }
            let t = 2.0 * i as f64 / (n - 1) as f64 - 1.0;
            bessel_i0(beta * (1.0 - t * t).max(0.0).sqrt()) / bessel_i0(beta)
        })
        .collect();
    let mut w = Vec::with_capacity(n * n);
    for a in &w1 {
        for b in &w1 {
            w.push(a * b);
        }
    }
    w
}

/// Reference offsets along one axis: every `step`, plus one flush with the
/// far edge.
fn reference_offsets(len: usize, bs: usize, step: usize) -> Vec<usize> {
    let last = len - bs;
    let mut v: Vec<usize> = (0..=last).step_by(step).collect();
    if *v.last().unwrap() != last {
        v.push(last);
    }
    v
}

fn reference_grid(width: usize, height: usize, profile: &Bm3dProfile) -> Vec<BlockPos> {
    let rows = reference_offsets(height, profile.block_size, profile.step);
    let cols = reference_offsets(width, profile.block_size, profile.step);
    rows.iter().flat_map(|&r| cols.iter().map(move |&c| (r, c))).collect()
}

/// 2D DCT spectra of every block position of an image, so each block is
/// transformed once no matter how many groups it joins.
struct BlockSpectra {
    cols: usize,
    nn: usize,
    coeffs: Vec<f64>,
}

impl BlockSpectra {
    fn new(img: &Image, dct: &Dct2) -> Self {
        let (w, bs) = (img.width(), dct.size());
        let nn = bs * bs;
        let rows = img.height() - bs + 1;
        let cols = w - bs + 1;
        let data = img.data();
        let mut coeffs = vec![0.0; rows * cols * nn];
        coeffs.par_chunks_mut(cols * nn).enumerate().for_each(|(r, out)| {
            let mut block = vec![0.0; nn];
            for c in 0..cols {
                for i in 0..bs {
                    block[i * bs..(i + 1) * bs].copy_from_slice(&data[(r + i) * w + c..(r + i) * w + c + bs]);
                }
                dct.forward(&block, &mut out[c * nn..(c + 1) * nn]);
            }
        });
        Self { cols, nn, coeffs }
    }

    /// Block-major stack of the spectra at `positions`.
    fn stack(&self, positions: &[BlockPos]) -> Vec<f64> {
        let mut out = Vec::with_capacity(positions.len() * self.nn);
        for &(r, c) in positions {
            let at = (r * self.cols + c) * self.nn;
            out.extend_from_slice(&self.coeffs[at..at + self.nn]);
        }
        out
    }
}

struct Aggregator {
    width: usize,
    height: usize,
    bs: usize,
    window: Vec<f64>,
    acc: Vec<f64>,
    weight: Vec<f64>,
}

impl Aggregator {
    fn new(width: usize, height: usize, profile: &Bm3dProfile) -> Self {
        Self {
            width,
            height,
            bs: profile.block_size,
            window: kaiser_window(profile.block_size, profile.kaiser_beta),
            acc: vec![0.0; width * height],
            weight: vec![0.0; width * height],
        }
    }

    fn add(&mut self, group: &BlockGroup, group_weight: f64) {
        let (bs, nn) = (self.bs, self.bs * self.bs);
        for (g, &(r, c)) in group.positions.iter().enumerate() {
            let block = &group.stack[g * nn..(g + 1) * nn];
            for i in 0..bs {
                let row = (r + i) * self.width + c;
                for j in 0..bs {
                    let w = group_weight * self.window[i * bs + j];
                    self.acc[row + j] += w * block[i * bs + j];
                    self.weight[row + j] += w;
                }
            }
        }
    }

    fn finish(self) -> Image {
        let data = self
            .acc
            .iter()
            .zip(&self.weight)
            .map(|(a, w)| {
                assert!(*w > 0.0, "aggregation left a pixel uncovered");
                a / w
            })
            .collect();
        Image::new(self.width, self.height, data).expect("aggregate is finite")
    }
}

fn check_inputs(img: &Image, sigma: f64, profile: &Bm3dProfile) -> Result<(), Bm3dError> {
    profile.validate()?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Bm3dError::InvalidSigma(sigma));
    }
    let bs = profile.block_size;
    if img.width() < bs || img.height() < bs {
        return Err(Bm3dError::ImageTooSmall { width: img.width(), height: img.height(), block: bs });
    }
    Ok(())
}

/// Runs `estimate` for every reference block and aggregates the returned
/// groups in reference order.
fn collaborative_filter<F>(width: usize, height: usize, profile: &Bm3dProfile, estimate: F) -> Image
where
    F: Fn(BlockPos) -> (BlockGroup, f64) + Sync,
{
    let refs = reference_grid(width, height, profile);
    let mut agg = Aggregator::new(width, height, profile);
    for batch in refs.chunks(BATCH) {
        let groups: Vec<(BlockGroup, f64)> = batch.par_iter().map(|&p| estimate(p)).collect();
        for (group, w) in &groups {
            agg.add(group, *w);
        }
    }
    agg.finish()
}

/// Basic estimate: hard thresholding of each group's 3D spectrum at
/// `profile.lambda_3d * sigma`, weighted by `1 / (sigma² * retained)`.
pub fn stage1_hard(noisy: &Image, sigma: f64, profile: &Bm3dProfile) -> Result<Image, Bm3dError> {
    check_inputs(noisy, sigma, profile)?;
    let (w, h, bs) = (noisy.width(), noisy.height(), profile.block_size);
    let dct = Dct2::new(bs);
    let threshold = profile.lambda_3d * sigma;
    let data = noisy.data();
    let spectra = BlockSpectra::new(noisy, &dct);
    Ok(collaborative_filter(w, h, profile, |reference| {
        let matches =
            match_raw(data, w, h, bs, reference, profile.search_radius, profile.match_threshold1, profile.max_group1);
        let positions: Vec<BlockPos> = matches.into_iter().map(|m| m.pos).collect();
        let mut group = BlockGroup { stack: spectra.stack(&positions), positions };
        let n = group.len();
        haar_along_group(&mut group.stack, n, bs * bs);
        let retained = hard_threshold(&mut group.stack, threshold);
        inverse_3d(&dct, &mut group.stack, n);
        (group, 1.0 / (sigma * sigma * retained.max(1) as f64))
    }))
}

/// Final estimate: groups matched on `basic`, noisy spectra shrunk by
/// `W = B² / (B² + sigma²)`, weighted by `1 / (sigma² * ΣW²)`.
pub fn stage2_wiener(noisy: &Image, basic: &Image, sigma: f64, profile: &Bm3dProfile) -> Result<Image, Bm3dError> {
    check_inputs(noisy, sigma, profile)?;
    noisy.ensure_same_dims(basic)?;
    let (w, h, bs) = (noisy.width(), noisy.height(), profile.block_size);
    let dct = Dct2::new(bs);
    let sigma2 = sigma * sigma;
    let basic_data = basic.data();
    let noisy_spectra = BlockSpectra::new(noisy, &dct);
    let basic_spectra = BlockSpectra::new(basic, &dct);
    Ok(collaborative_filter(w, h, profile, |reference| {
        let matches = match_raw(
            basic_data,
            w,
            h,
            bs,
            reference,
            profile.search_radius,
            profile.match_threshold2,
            profile.max_group2,
        );
        let positions: Vec<BlockPos> = matches.into_iter().map(|m| m.pos).collect();
        let n = positions.len();
        let mut pilot = basic_spectra.stack(&positions);
        let mut group = BlockGroup { stack: noisy_spectra.stack(&positions), positions };
        haar_along_group(&mut pilot, n, bs * bs);
        haar_along_group(&mut group.stack, n, bs * bs);
        let mut energy = 0.0;
        for (c, b) in group.stack.iter_mut().zip(&pilot) {
            let b2 = b * b;
            let shrink = b2 / (b2 + sigma2);
            *c *= shrink;
            energy += shrink * shrink;
        }
        inverse_3d(&dct, &mut group.stack, n);
        // A group whose pilot spectrum is entirely zero estimates zero;
        // give it the unit-energy weight so it still covers its pixels.
        let weight = if energy > 0.0 { 1.0 / (sigma2 * energy) } else { 1.0 / sigma2 };
        (group, weight)
    }))
}

/// Full BM3D at the given threshold multiplier, clamped to `[0, 255]`.
pub fn denoise(noisy: &Image, sigma: f64, lambda_3d: f64, profile: &Bm3dProfile) -> Result<Image, Bm3dError> {
    let profile = profile.with_lambda(lambda_3d);
    let basic = stage1_hard(noisy, sigma, &profile)?;
    let out = if profile.enable_stage2 { stage2_wiener(noisy, &basic, sigma, &profile)? } else { basic };
    Ok(out.clamped())
}
