use super::{Image, ImageError, MAX_INTENSITY};

/// Side of the square Gaussian SSIM window.
pub const SSIM_WINDOW: usize = 11;
const SSIM_GAUSS_STD: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricTriple {
    pub mse: f64,
    /// `f64::INFINITY` when `mse == 0`.
    pub psnr: f64,
    pub ssim: f64,
}

impl MetricTriple {
    pub fn compute(estimate: &Image, reference: &Image) -> Result<Self, ImageError> {
        let mse = mse(estimate, reference)?;
        Ok(Self { mse, psnr: psnr_from_mse(mse), ssim: ssim(estimate, reference)? })
    }
}

pub fn mse(a: &Image, b: &Image) -> Result<f64, ImageError> {
    a.ensure_same_dims(b)?;
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.data().len() as f64)
}

pub fn psnr(a: &Image, b: &Image) -> Result<f64, ImageError> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub(crate) fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (MAX_INTENSITY * MAX_INTENSITY / mse).log10()
    }
}

/// Normalized 1D Gaussian taps; the 2D window is their outer product.
pub(crate) fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut taps = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - c;
        *t = (-d * d / (2.0 * SSIM_GAUSS_STD * SSIM_GAUSS_STD)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Valid-region separable Gaussian filter of `src` (`w x h`).
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&line[x..x + SSIM_WINDOW]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(k, t)| t * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM over all window positions fully inside the image.
pub fn ssim(a: &Image, b: &Image) -> Result<f64, ImageError> {
    a.ensure_same_dims(b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(ImageError::TooSmall { width: w, height: h, min: SSIM_WINDOW });
    }
    let taps = gaussian_taps();
    let (x, y) = (a.data(), b.data());
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();

    let mu_x = filter_valid(x, w, h, &taps);
    let mu_y = filter_valid(y, w, h, &taps);
    let e_xx = filter_valid(&xx, w, h, &taps);
    let e_yy = filter_valid(&yy, w, h, &taps);
    let e_xy = filter_valid(&xy, w, h, &taps);

    let c1 = (SSIM_K1 * MAX_INTENSITY).powi(2);
    let c2 = (SSIM_K2 * MAX_INTENSITY).powi(2);
    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = e_xx[i] - mx * mx;
        let vy = e_yy[i] - my * my;
        let cov = e_xy[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(total / mu_x.len() as f64)
}
