//! Independent reference implementations shared by integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use lambda3d::cnn::CnnModel;
use lambda3d::image::Image;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn random_image(width: usize, height: usize, seed: u64) -> Image {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let data = (0..width * height).map(|_| rng.gen_range(0.0..=255.0)).collect();
    Image::new(width, height, data).unwrap()
}

/// Outcome of comparing backpropagated gradients with central differences.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    /// Largest relative error over every parameter.
    pub worst: f64,
    pub parameters: usize,
    /// Probes whose `+-h` evaluations switched a ReLU or max-pool winner and
    /// were therefore re-measured with a smaller step.
    pub refined: usize,
}

fn eval_at(probe: &mut CnnModel, t: usize, i: usize, value: f64, img: &Image) -> (f64, Vec<usize>) {
    probe.tensors_mut().nth(t).unwrap()[i] = value;
    let (y, cache) = probe.forward(img).unwrap();
    (y, cache.gating_pattern())
}

/// Compares the analytic gradient of the model output with a central
/// difference `(f(p+h) - f(p-h)) / 2h` for every parameter. Relative error
/// is `|a - n| / max(|a|, |n|, floor)`, so roundoff on vanishing gradients
/// does not count as disagreement.
///
/// The network is piecewise smooth: a difference quotient whose two probes
/// land on different sides of a ReLU or max-pool switch measures the jump,
/// not the derivative. Such probes are repeated with the step divided by 10
/// (down to `h * 1e-4`) until both probes share the unperturbed gating
/// pattern; their count is reported.
pub fn gradient_check(model: &CnnModel, img: &Image, h: f64, floor: f64) -> GradCheck {
    let (_, cache) = model.forward(img).unwrap();
    let base_pattern = cache.gating_pattern();
    let (grads, _) = model.backward(&cache, 1.0).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().cloned().collect();
    let mut probe = model.clone();
    let mut out = GradCheck { worst: 0.0, parameters: 0, refined: 0 };
    for (t, a_t) in analytic.iter().enumerate() {
        for (i, &a) in a_t.iter().enumerate() {
            let orig = model.tensors().nth(t).unwrap()[i];
            let mut step = h;
            let numeric = loop {
                let (up, pu) = eval_at(&mut probe, t, i, orig + step, img);
                let (down, pd) = eval_at(&mut probe, t, i, orig - step, img);
                let smooth = pu == base_pattern && pd == base_pattern;
                if smooth || step <= h * 1e-4 {
                    break (up - down) / (2.0 * step);
                }
                step /= 10.0;
            };
            if step != h {
                out.refined += 1;
            }
            probe.tensors_mut().nth(t).unwrap()[i] = orig;
            let denom = a.abs().max(numeric.abs()).max(floor);
            out.worst = out.worst.max((a - numeric).abs() / denom);
            out.parameters += 1;
        }
    }
    out
}

/// SSIM written straight from the definition: an 11x11 Gaussian window
/// (std 1.5, normalized) evaluated at every fully contained position with a
/// direct double loop, then averaged.
pub fn ssim_direct(x: &Image, y: &Image) -> f64 {
    let (w, h) = (x.width(), x.height());
    let r = 5usize;
    let mut win = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (dy, row) in win.iter_mut().enumerate() {
        for (dx, v) in row.iter_mut().enumerate() {
            let (fy, fx) = (dy as f64 - 5.0, dx as f64 - 5.0);
            *v = (-(fy * fy + fx * fx) / (2.0 * 1.5 * 1.5)).exp();
            total += *v;
        }
    }
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let mut acc = 0.0;
    let mut count = 0usize;
    for cy in r..h - r {
        for cx in r..w - r {
            let (mut mx, mut my) = (0.0, 0.0);
            for dy in 0..11 {
                for dx in 0..11 {
                    let g = win[dy][dx] / total;
                    mx += g * x.get(cy + dy - r, cx + dx - r);
                    my += g * y.get(cy + dy - r, cx + dx - r);
                }
            }
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for dy in 0..11 {
                for dx in 0..11 {
                    let g = win[dy][dx] / total;
                    let a = x.get(cy + dy - r, cx + dx - r) - mx;
                    let b = y.get(cy + dy - r, cx + dx - r) - my;
                    vx += g * a * a;
                    vy += g * b * b;
                    cxy += g * a * b;
                }
            }
            acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    acc / count as f64
}
