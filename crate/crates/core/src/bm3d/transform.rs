//! Orthonormal 2D DCT-II on square blocks and the full 1D Haar transform
//! along the group axis. Both are unitary, so their composition is a unitary
//! 3D transform of a block group.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::Bm3dError;

/// Precomputed orthonormal DCT-II basis for `n x n` blocks.
#[derive(Debug, Clone)]
pub struct Dct2 {
    n: usize,
    /// `basis[k * n + i] = alpha_k * cos(pi * (2i + 1) * k / 2n)`
    basis: Vec<f64>,
}

impl Dct2 {
    pub fn new(n: usize) -> Self {
        assert!(n > 0);
        let mut basis = vec![0.0; n * n];
        for k in 0..n {
            let alpha = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            for i in 0..n {
                basis[k * n + i] = alpha * (PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos();
            }
        }
        Self { n, basis }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// `out = C * block * C^T`
    pub fn forward(&self, block: &[f64], out: &mut [f64]) {
        let n = self.n;
        debug_assert!(block.len() == n * n && out.len() == n * n);
        let mut buf = Scratch::new(n * n);
        let tmp = buf.as_mut();
        // Columns first: tmp = C * block.
        for k in 0..n {
            let row = &self.basis[k * n..(k + 1) * n];
            for j in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += row[i] * block[i * n + j];
                }
                tmp[k * n + j] = acc;
            }
        }
        for r in 0..n {
            let src = &tmp[r * n..(r + 1) * n];
            for k in 0..n {
                let basis = &self.basis[k * n..(k + 1) * n];
                out[r * n + k] = src.iter().zip(basis).map(|(a, b)| a * b).sum();
            }
        }
    }

    /// `out = C^T * coeffs * C`
    pub fn inverse(&self, coeffs: &[f64], out: &mut [f64]) {
        let n = self.n;
        debug_assert!(coeffs.len() == n * n && out.len() == n * n);
        let mut buf = Scratch::new(n * n);
        let tmp = buf.as_mut();
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.basis[k * n + i] * coeffs[k * n + j];
                }
                tmp[i * n + j] = acc;
            }
        }
        for r in 0..n {
            for i in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += tmp[r * n + k] * self.basis[k * n + i];
                }
                out[r * n + i] = acc;
            }
        }
    }
}

/// Stack buffer for the common block sizes, heap otherwise. Lives only for
/// one transform call, so the size imbalance between variants is harmless.
#[allow(clippy::large_enum_variant)]
enum Scratch {
    Inline([f64; 256], usize),
    Heap(Vec<f64>),
}

impl Scratch {
    fn new(len: usize) -> Self {
        if len <= 256 {
            Scratch::Inline([0.0; 256], len)
        } else {
            Scratch::Heap(vec![0.0; len])
        }
    }

    fn as_mut(&mut self) -> &mut [f64] {
        match self {
            Scratch::Inline(a, len) => &mut a[..*len],
            Scratch::Heap(v) => v,
        }
    }
}

fn square_side(len: usize, block_size: usize) -> Result<(), Bm3dError> {
    if len != block_size * block_size || block_size == 0 {
        return Err(Bm3dError::WrongBlockSize { expected: block_size * block_size, found: len });
    }
    Ok(())
}

pub fn dct2(block: &[f64], block_size: usize) -> Result<Vec<f64>, Bm3dError> {
    square_side(block.len(), block_size)?;
    let mut out = vec![0.0; block.len()];
    Dct2::new(block_size).forward(block, &mut out);
    Ok(out)
}

pub fn idct2(coeffs: &[f64], block_size: usize) -> Result<Vec<f64>, Bm3dError> {
    square_side(coeffs.len(), block_size)?;
    let mut out = vec![0.0; coeffs.len()];
    Dct2::new(block_size).inverse(coeffs, &mut out);
    Ok(out)
}

fn check_haar_len(len: usize) -> Result<(), Bm3dError> {
    if !len.is_power_of_two() || len > 32 {
        return Err(Bm3dError::BadGroupLength(len));
    }
    Ok(())
}

/// In-place full Haar decomposition. Output layout is
/// `[approx, detail(coarsest), detail(next) x2, ..., detail(finest) x n/2]`.
pub(crate) fn haar_forward(values: &mut [f64], scratch: &mut [f64]) {
    let mut len = values.len();
    while len > 1 {
        let half = len / 2;
        for i in 0..half {
            let (a, b) = (values[2 * i], values[2 * i + 1]);
            scratch[i] = (a + b) * FRAC_1_SQRT_2;
            scratch[half + i] = (a - b) * FRAC_1_SQRT_2;
        }
        values[..len].copy_from_slice(&scratch[..len]);
        len = half;
    }
}

pub(crate) fn haar_inverse(values: &mut [f64], scratch: &mut [f64]) {
    let n = values.len();
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        for i in 0..half {
            let (s, d) = (values[i], values[half + i]);
            scratch[2 * i] = (s + d) * FRAC_1_SQRT_2;
            scratch[2 * i + 1] = (s - d) * FRAC_1_SQRT_2;
        }
        values[..len].copy_from_slice(&scratch[..len]);
        len *= 2;
    }
}

pub fn haar1(values: &[f64]) -> Result<Vec<f64>, Bm3dError> {
    check_haar_len(values.len())?;
    let mut out = values.to_vec();
    let mut scratch = vec![0.0; values.len()];
    haar_forward(&mut out, &mut scratch);
    Ok(out)
}

pub fn ihaar1(coeffs: &[f64]) -> Result<Vec<f64>, Bm3dError> {
    check_haar_len(coeffs.len())?;
    let mut out = coeffs.to_vec();
    let mut scratch = vec![0.0; coeffs.len()];
    haar_inverse(&mut out, &mut scratch);
    Ok(out)
}

/// Haar transform along the group axis of a block-major stack
/// (`stack[g * nn + p]`), one line per in-block position.
pub(crate) fn haar_along_group(stack: &mut [f64], group: usize, nn: usize) {
    along_group(stack, group, nn, haar_forward);
}

pub(crate) fn ihaar_along_group(stack: &mut [f64], group: usize, nn: usize) {
    along_group(stack, group, nn, haar_inverse);
}

/// Inverse 3D transform of a block-major spectrum stack back to pixels.
pub(crate) fn inverse_3d(dct: &Dct2, stack: &mut [f64], group: usize) {
    let nn = dct.size() * dct.size();
    ihaar_along_group(stack, group, nn);
    let mut pixels = vec![0.0; nn];
    for g in 0..group {
        let block = &mut stack[g * nn..(g + 1) * nn];
        dct.inverse(block, &mut pixels);
        block.copy_from_slice(&pixels);
    }
}

#[cfg(test)]
pub(crate) fn forward_3d(dct: &Dct2, stack: &mut [f64], group: usize) {
    let nn = dct.size() * dct.size();
    let mut coeffs = vec![0.0; nn];
    for g in 0..group {
        let block = &mut stack[g * nn..(g + 1) * nn];
        dct.forward(block, &mut coeffs);
        block.copy_from_slice(&coeffs);
    }
    haar_along_group(stack, group, nn);
}

fn along_group(stack: &mut [f64], group: usize, nn: usize, f: fn(&mut [f64], &mut [f64])) {
    if group == 1 {
        return;
    }
    let mut line_buf = [0.0; 32];
    let mut scratch = [0.0; 32];
    let line = &mut line_buf[..group];
    for p in 0..nn {
        for g in 0..group {
            line[g] = stack[g * nn + p];
        }
        f(line, &mut scratch);
        for g in 0..group {
            stack[g * nn + p] = line[g];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn constant_block_has_only_dc() {
        let c = 3.25;
        let out = dct2(&[c; 64], 8).unwrap();
        assert_abs_diff_eq!(out[0], 8.0 * c, epsilon = 1e-9);
        for &v in &out[1..] {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn dct_matches_direct_definition() {
        let n = 4;
        let x: Vec<f64> = (0..16).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let fast = dct2(&x, n).unwrap();
        for k in 0..n {
            for l in 0..n {
                let ak = if k == 0 { 0.5 } else { (0.5f64).sqrt() };
                let al = if l == 0 { 0.5 } else { (0.5f64).sqrt() };
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        s += x[i * n + j]
                            * (PI * (2 * i + 1) as f64 * k as f64 / 8.0).cos()
                            * (PI * (2 * j + 1) as f64 * l as f64 / 8.0).cos();
                    }
                }
                assert_abs_diff_eq!(fast[k * n + l], ak * al * s, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn wrong_sizes_rejected() {
        assert!(matches!(dct2(&[0.0; 63], 8), Err(Bm3dError::WrongBlockSize { .. })));
        assert!(matches!(idct2(&[0.0; 10], 3), Err(Bm3dError::WrongBlockSize { .. })));
        assert!(matches!(haar1(&[0.0; 3]), Err(Bm3dError::BadGroupLength(3))));
        assert!(matches!(haar1(&[]), Err(Bm3dError::BadGroupLength(0))));
        assert!(matches!(ihaar1(&[0.0; 64]), Err(Bm3dError::BadGroupLength(64))));
    }

    #[test]
    fn haar_definition_cases() {
        let a = haar1(&[2.0, 2.0]).unwrap();
        assert_abs_diff_eq!(a[0], 2.82842712, epsilon = 1e-8);
        assert_abs_diff_eq!(a[1], 0.0, epsilon = 1e-8);
        let b = haar1(&[1.0, -1.0]).unwrap();
        assert_abs_diff_eq!(b[0], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(b[1], 2f64.sqrt(), epsilon = 1e-12);
        assert_eq!(haar1(&[7.5]).unwrap(), vec![7.5]);
        // Constant length-4 signal: all energy in the approximation.
        let c = haar1(&[1.0; 4]).unwrap();
        assert_abs_diff_eq!(c[0], 2.0, epsilon = 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn dct_round_trip_and_parseval(x in prop::collection::vec(-300.0f64..300.0, 64)) {
            let c = dct2(&x, 8).unwrap();
            let back = idct2(&c, 8).unwrap();
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-6);
            }
            let e1: f64 = x.iter().map(|v| v * v).sum();
            let e2: f64 = c.iter().map(|v| v * v).sum();
            prop_assert!((e1 - e2).abs() <= 1e-6 * e1.max(1.0));
        }

        #[test]
        fn haar_round_trip_and_energy(x in prop::collection::vec(-10.0f64..10.0, 16)) {
            let c = haar1(&x).unwrap();
            let back = ihaar1(&c).unwrap();
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            let e1: f64 = x.iter().map(|v| v * v).sum();
            let e2: f64 = c.iter().map(|v| v * v).sum();
            prop_assert!((e1 - e2).abs() < 1e-9 * e1.max(1.0));
        }

        #[test]
        fn group_transform_round_trip(x in prop::collection::vec(0.0f64..255.0, 4 * 64)) {
            let dct = Dct2::new(8);
            let mut s = x.clone();
            forward_3d(&dct, &mut s, 4);
            inverse_3d(&dct, &mut s, 4);
            for (a, b) in x.iter().zip(&s) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
