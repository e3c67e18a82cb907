//! Seeded additive white Gaussian noise.
//!
//! Normal deviates come from Box–Muller over a ChaCha20 stream seeded with
//! `ChaCha20Rng::seed_from_u64(seed)`. Each pair of uniforms `(u1, u2)`
//! yields `sqrt(-2 ln u1) * cos(2π u2)` followed by
//! `sqrt(-2 ln u1) * sin(2π u2)`, consumed in row-major pixel order.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{Image, MAX_INTENSITY};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, seed: u64) -> Self {
        assert!(sigma >= 0.0 && sigma.is_finite(), "sigma must be finite and >= 0");
        Self { sigma, seed }
    }
}

struct BoxMuller {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl BoxMuller {
    fn new(seed: u64) -> Self {
        Self { rng: ChaCha20Rng::seed_from_u64(seed), spare: None }
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log finite.
        let u1 = 1.0 - self.rng.gen::<f64>();
        let u2 = self.rng.gen::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

/// Returns `clamp(img + sigma * z, 0, 255)` with `z` i.i.d. standard normal.
pub fn add_awgn(img: &Image, spec: NoiseSpec) -> Image {
    if spec.sigma == 0.0 {
        return img.clone();
    }
    let mut gen = BoxMuller::new(spec.seed);
    let data = img.data().iter().map(|&v| (v + spec.sigma * gen.next()).clamp(0.0, MAX_INTENSITY)).collect();
    Image::new(img.width(), img.height(), data).expect("noise preserves shape")
}
