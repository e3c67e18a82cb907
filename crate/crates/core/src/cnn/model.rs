use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::image::{Image, MAX_INTENSITY};

use super::layers::{self, FeatureMap};
use super::CnnError;

/// Feature counts from the input through the four separable blocks.
pub const CHANNEL_PLAN: [usize; 5] = [1, 8, 16, 32, 64];
/// Five 2x2 poolings need at least 32 pixels per side to leave one.
pub const MIN_INPUT_SIDE: usize = 32;

/// Depthwise 3x3 followed by pointwise 1x1 with bias.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableBlock {
    pub in_ch: usize,
    pub out_ch: usize,
    /// `[in_ch][3][3]`
    pub depthwise: Vec<f64>,
    /// `[out_ch][in_ch]`
    pub pointwise: Vec<f64>,
    pub bias: Vec<f64>,
}

impl SeparableBlock {
    pub fn zeros(in_ch: usize, out_ch: usize) -> Self {
        Self {
            in_ch,
            out_ch,
            depthwise: vec![0.0; in_ch * 9],
            pointwise: vec![0.0; out_ch * in_ch],
            bias: vec![0.0; out_ch],
        }
    }

    fn tensors(&self) -> [&Vec<f64>; 3] {
        [&self.depthwise, &self.pointwise, &self.bias]
    }

    fn tensors_mut(&mut self) -> [&mut Vec<f64>; 3] {
        [&mut self.depthwise, &mut self.pointwise, &mut self.bias]
    }
}

/// The regression network for one noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    pub sigma: f64,
    pub blocks: Vec<SeparableBlock>,
}

/// Parameter gradients, shaped like the model's blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub blocks: Vec<SeparableBlock>,
}

impl Gradients {
    pub fn tensors(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.blocks.iter().flat_map(|b| b.tensors())
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|&v| v == 0.0))
    }
}

struct BlockCache {
    input: FeatureMap,
    depthwise_out: FeatureMap,
    pre_activation: FeatureMap,
    argmax: Vec<usize>,
}

/// Activations recorded by [`CnnModel::forward`] for [`CnnModel::backward`].
pub struct ForwardCache {
    input_shape: (usize, usize),
    blocks: Vec<BlockCache>,
    /// Output of the last block, fed to the global mean.
    head_input: FeatureMap,
}

impl ForwardCache {
    pub fn head_input(&self) -> &FeatureMap {
        &self.head_input
    }

    /// Block outputs after ReLU and before pooling.
    pub fn activations(&self, block: usize) -> FeatureMap {
        let mut a = self.blocks[block].pre_activation.clone();
        layers::relu(&mut a);
        a
    }

    /// Input of each block (pooled output of the previous stage).
    pub fn block_input(&self, block: usize) -> &FeatureMap {
        &self.blocks[block].input
    }

    /// The piecewise-linear region this forward pass landed in: the ReLU
    /// on/off state of every pre-activation followed by every max-pool
    /// winner index. Two inputs with equal patterns are related by a smooth
    /// map, so finite differences between them are meaningful.
    pub fn gating_pattern(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for c in &self.blocks {
            out.extend(c.pre_activation.values.iter().map(|&v| usize::from(v > 0.0)));
            out.extend_from_slice(&c.argmax);
        }
        out
    }
}

impl CnnModel {
    /// All-zero parameters on the standard channel plan.
    pub fn zeros(sigma: f64) -> Self {
        let blocks = CHANNEL_PLAN.windows(2).map(|w| SeparableBlock::zeros(w[0], w[1])).collect();
        Self { sigma, blocks }
    }

    /// Glorot-uniform weights, zero biases. Depthwise kernels use
    /// `fan_in = fan_out = 9`, pointwise kernels `in_ch` and `out_ch`.
    /// Values are drawn block by block, depthwise before pointwise, from
    /// `ChaCha20Rng::seed_from_u64(seed)`.
    pub fn xavier_init(sigma: f64, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut model = Self::zeros(sigma);
        for b in &mut model.blocks {
            let dl = xavier_limit(9, 9);
            b.depthwise.iter_mut().for_each(|v| *v = rng.gen_range(-dl..dl));
            let pl = xavier_limit(b.in_ch, b.out_ch);
            b.pointwise.iter_mut().for_each(|v| *v = rng.gen_range(-pl..pl));
        }
        model
    }

    pub fn validate_shape(&self) -> Result<(), CnnError> {
        if self.blocks.len() != CHANNEL_PLAN.len() - 1 {
            return Err(CnnError::ShapeMismatch(format!("{} blocks, expected 4", self.blocks.len())));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            let (ci, co) = (CHANNEL_PLAN[i], CHANNEL_PLAN[i + 1]);
            if b.in_ch != ci
                || b.out_ch != co
                || b.depthwise.len() != ci * 9
                || b.pointwise.len() != ci * co
                || b.bias.len() != co
            {
                return Err(CnnError::ShapeMismatch(format!(
                    "block {i} is {}->{}, expected {ci}->{co}",
                    b.in_ch, b.out_ch
                )));
            }
        }
        Ok(())
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.blocks.iter().flat_map(|b| b.tensors())
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.blocks.iter_mut().flat_map(|b| b.tensors_mut())
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().map(Vec::len).sum()
    }

    /// Returns the scalar prediction and the activations needed for
    /// backpropagation.
    pub fn forward(&self, img: &Image) -> Result<(f64, ForwardCache), CnnError> {
        let (w, h) = (img.width(), img.height());
        if w < MIN_INPUT_SIDE || h < MIN_INPUT_SIDE {
            return Err(CnnError::InputTooSmall { width: w, height: h });
        }
        let input = FeatureMap {
            channels: 1,
            height: h,
            width: w,
            values: img.data().iter().map(|v| v / MAX_INTENSITY).collect(),
        };
        let mut x = layers::avg_pool2(&input);
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let d = layers::depthwise3x3(&x, &b.depthwise);
            let z = layers::pointwise(&d, &b.pointwise, &b.bias);
            let mut a = z.clone();
            layers::relu(&mut a);
            let (pooled, argmax) = layers::max_pool2(&a);
            caches.push(BlockCache { input: x, depthwise_out: d, pre_activation: z, argmax });
            x = pooled;
        }
        let prediction = x.values.iter().sum::<f64>() / x.values.len() as f64;
        Ok((prediction, ForwardCache { input_shape: (h, w), blocks: caches, head_input: x }))
    }

    /// Gradients of `d_prediction * prediction` with respect to every
    /// parameter, and with respect to the (unscaled) input pixels.
    pub fn backward(&self, cache: &ForwardCache, d_prediction: f64) -> Result<(Gradients, Image), CnnError> {
        if cache.blocks.len() != self.blocks.len()
            || cache.blocks.iter().zip(&self.blocks).any(|(c, b)| c.input.channels != b.in_ch)
        {
            return Err(CnnError::ShapeMismatch("forward cache does not match model".into()));
        }
        let head = &cache.head_input;
        let n = head.values.len() as f64;
        let mut g = FeatureMap { values: vec![d_prediction / n; head.values.len()], ..head.clone() };

        let mut grads: Vec<SeparableBlock> = Vec::with_capacity(self.blocks.len());
        for (b, c) in self.blocks.iter().zip(&cache.blocks).rev() {
            let z = &c.pre_activation;
            let mut gz = layers::max_pool2_backward(&g, &c.argmax, (z.channels, z.height, z.width));
            layers::relu_backward(z, &mut gz);
            let (gd, gpw, gb) = layers::pointwise_backward(&c.depthwise_out, &b.pointwise, &gz);
            let (gx, gdw) = layers::depthwise3x3_backward(&c.input, &b.depthwise, &gd);
            grads.push(SeparableBlock { in_ch: b.in_ch, out_ch: b.out_ch, depthwise: gdw, pointwise: gpw, bias: gb });
            g = gx;
        }
        grads.reverse();
        let (h, w) = cache.input_shape;
        let gin = layers::avg_pool2_backward(&g, h, w);
        let pixels = gin.values.iter().map(|v| v / MAX_INTENSITY).collect();
        let input_grad = Image::new(w, h, pixels).expect("finite gradients");
        Ok((Gradients { blocks: grads }, input_grad))
    }

    /// Raw network output for a noisy image. No clamping.
    pub fn predict(&self, noisy: &Image) -> Result<f64, CnnError> {
        Ok(self.forward(noisy)?.0)
    }
}

pub fn xavier_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Squared error between prediction and label.
pub fn loss(prediction: f64, label: f64) -> f64 {
    (prediction - label) * (prediction - label)
}

pub fn loss_grad(prediction: f64, label: f64) -> f64 {
    2.0 * (prediction - label)
}
