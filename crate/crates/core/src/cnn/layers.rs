//! Layer kernels on channel-major feature maps, forward and backward.

/// Channel-major `[c][y][x]` activation volume.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width, values: vec![0.0; channels * height * width] }
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.values[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.values[c * n..(c + 1) * n]
    }

    pub fn same_shape(&self, other: &FeatureMap) -> bool {
        (self.channels, self.height, self.width) == (other.channels, other.height, other.width)
    }
}

/// 2x2 stride-2 average pooling, floor mode.
pub fn avg_pool2(x: &FeatureMap) -> FeatureMap {
    let (oh, ow) = (x.height / 2, x.width / 2);
    let mut out = FeatureMap::zeros(x.channels, oh, ow);
    for c in 0..x.channels {
        let src = x.plane(c);
        let dst = out.plane_mut(c);
        for y in 0..oh {
            for xx in 0..ow {
                let i = 2 * y * x.width + 2 * xx;
                dst[y * ow + xx] = 0.25 * (src[i] + src[i + 1] + src[i + x.width] + src[i + x.width + 1]);
            }
        }
    }
    out
}

/// Spreads each output gradient evenly over its 2x2 window. Rows or columns
/// dropped by floor mode receive zero.
pub fn avg_pool2_backward(grad_out: &FeatureMap, in_height: usize, in_width: usize) -> FeatureMap {
    let mut g = FeatureMap::zeros(grad_out.channels, in_height, in_width);
    for c in 0..grad_out.channels {
        let src = grad_out.plane(c);
        let dst = g.plane_mut(c);
        for y in 0..grad_out.height {
            for x in 0..grad_out.width {
                let v = 0.25 * src[y * grad_out.width + x];
                let i = 2 * y * in_width + 2 * x;
                dst[i] += v;
                dst[i + 1] += v;
                dst[i + in_width] += v;
                dst[i + in_width + 1] += v;
            }
        }
    }
    g
}

/// 2x2 stride-2 max pooling, floor mode. Also returns, per output, the flat
/// index into the input of the winning element (first maximum in row-major
/// scan order).
pub fn max_pool2(x: &FeatureMap) -> (FeatureMap, Vec<usize>) {
    let (oh, ow) = (x.height / 2, x.width / 2);
    let mut out = FeatureMap::zeros(x.channels, oh, ow);
    let mut arg = vec![0; x.channels * oh * ow];
    let plane = x.height * x.width;
    for c in 0..x.channels {
        let src = x.plane(c);
        for y in 0..oh {
            for xx in 0..ow {
                let base = 2 * y * x.width + 2 * xx;
                let mut best = base;
                for cand in [base + 1, base + x.width, base + x.width + 1] {
                    if src[cand] > src[best] {
                        best = cand;
                    }
                }
                let o = c * oh * ow + y * ow + xx;
                out.values[o] = src[best];
                arg[o] = c * plane + best;
            }
        }
    }
    (out, arg)
}

pub fn max_pool2_backward(grad_out: &FeatureMap, argmax: &[usize], in_shape: (usize, usize, usize)) -> FeatureMap {
    let (c, h, w) = in_shape;
    let mut g = FeatureMap::zeros(c, h, w);
    for (v, &i) in grad_out.values.iter().zip(argmax) {
        g.values[i] += v;
    }
    g
}

/// Per-channel 3x3 correlation with zero "same" padding.
/// `kernels[c * 9 + ky * 3 + kx]`.
pub fn depthwise3x3(x: &FeatureMap, kernels: &[f64]) -> FeatureMap {
    let (h, w) = (x.height, x.width);
    let mut out = FeatureMap::zeros(x.channels, h, w);
    for c in 0..x.channels {
        let k = &kernels[c * 9..(c + 1) * 9];
        let src = x.plane(c);
        let dst = out.plane_mut(c);
        for ky in 0..3 {
            for kx in 0..3 {
                let kv = k[ky * 3 + kx];
                // Output rows/cols whose tap (y + ky - 1, x + kx - 1) is inside.
                let y0 = 1usize.saturating_sub(ky);
                let y1 = (h + 1 - ky).min(h);
                let x0 = 1usize.saturating_sub(kx);
                let x1 = (w + 1 - kx).min(w);
                for y in y0..y1 {
                    let sy = y + ky - 1;
                    let s = &src[sy * w + x0 + kx - 1..sy * w + x1 + kx - 1];
                    let d = &mut dst[y * w + x0..y * w + x1];
                    for (dv, sv) in d.iter_mut().zip(s) {
                        *dv += kv * sv;
                    }
                }
            }
        }
    }
    out
}

/// Returns `(grad_input, grad_kernels)` for [`depthwise3x3`].
pub fn depthwise3x3_backward(x: &FeatureMap, kernels: &[f64], grad_out: &FeatureMap) -> (FeatureMap, Vec<f64>) {
    let (h, w) = (x.height, x.width);
    let mut gx = FeatureMap::zeros(x.channels, h, w);
    let mut gk = vec![0.0; kernels.len()];
    for c in 0..x.channels {
        let k = &kernels[c * 9..(c + 1) * 9];
        let src = x.plane(c);
        let go = grad_out.plane(c);
        let gxp = gx.plane_mut(c);
        for ky in 0..3 {
            for kx in 0..3 {
                let kv = k[ky * 3 + kx];
                let y0 = 1usize.saturating_sub(ky);
                let y1 = (h + 1 - ky).min(h);
                let x0 = 1usize.saturating_sub(kx);
                let x1 = (w + 1 - kx).min(w);
                let mut acc = 0.0;
                for y in y0..y1 {
                    let sy = y + ky - 1;
                    for x in x0..x1 {
                        let si = sy * w + x + kx - 1;
                        let g = go[y * w + x];
                        acc += g * src[si];
                        gxp[si] += g * kv;
                    }
                }
                gk[c * 9 + ky * 3 + kx] = acc;
            }
        }
    }
    (gx, gk)
}

/// 1x1 convolution plus bias. `weights[o * in_ch + i]`.
pub fn pointwise(x: &FeatureMap, weights: &[f64], bias: &[f64]) -> FeatureMap {
    let out_ch = bias.len();
    let mut out = FeatureMap::zeros(out_ch, x.height, x.width);
    for o in 0..out_ch {
        let dst = out.plane_mut(o);
        dst.fill(bias[o]);
        for i in 0..x.channels {
            let wv = weights[o * x.channels + i];
            for (d, s) in dst.iter_mut().zip(x.plane(i)) {
                *d += wv * s;
            }
        }
    }
    out
}

/// Returns `(grad_input, grad_weights, grad_bias)` for [`pointwise`].
pub fn pointwise_backward(x: &FeatureMap, weights: &[f64], grad_out: &FeatureMap) -> (FeatureMap, Vec<f64>, Vec<f64>) {
    let in_ch = x.channels;
    let out_ch = grad_out.channels;
    let mut gx = FeatureMap::zeros(in_ch, x.height, x.width);
    let mut gw = vec![0.0; out_ch * in_ch];
    let mut gb = vec![0.0; out_ch];
    for o in 0..out_ch {
        let go = grad_out.plane(o);
        gb[o] = go.iter().sum();
        for i in 0..in_ch {
            gw[o * in_ch + i] = go.iter().zip(x.plane(i)).map(|(g, v)| g * v).sum();
            let wv = weights[o * in_ch + i];
            for (d, g) in gx.plane_mut(i).iter_mut().zip(go) {
                *d += wv * g;
            }
        }
    }
    (gx, gw, gb)
}

pub fn relu(x: &mut FeatureMap) {
    for v in &mut x.values {
        *v = v.max(0.0);
    }
}

/// Zeroes gradient entries where the forward pre-activation was `<= 0`.
pub fn relu_backward(pre: &FeatureMap, grad: &mut FeatureMap) {
    for (g, z) in grad.values.iter_mut().zip(&pre.values) {
        if *z <= 0.0 {
            *g = 0.0;
        }
    }
}
