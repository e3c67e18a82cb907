use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::dataset::DatasetManifest;
use crate::image::{load_image, Image};

use super::adam::{adam_step, AdamState};
use super::model::{loss, loss_grad, CnnModel};
use super::{CnnError, TrainConfig};

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: CnnModel,
    /// Mean per-example loss of each epoch, measured before each update.
    pub loss_history: Vec<f64>,
}

/// Trains on in-memory `(noisy image, label)` pairs with batch size one.
/// Each epoch visits every example once in an order shuffled by a
/// `ChaCha20Rng` seeded with `config.shuffle_seed`.
pub fn train_examples(examples: &[(Image, f64)], sigma: f64, config: &TrainConfig) -> Result<TrainOutcome, CnnError> {
    if examples.is_empty() {
        return Err(CnnError::NoExamples(sigma));
    }
    let mut model = CnnModel::xavier_init(sigma, config.init_seed);
    let mut state = AdamState::new(&model);
    let mut rng = ChaCha20Rng::seed_from_u64(config.shuffle_seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let (img, label) = &examples[i];
            let (pred, cache) = model.forward(img)?;
            total += loss(pred, *label);
            let (grads, _) = model.backward(&cache, loss_grad(pred, *label))?;
            adam_step(&mut model, &grads, &mut state, config)?;
        }
        loss_history.push(total / examples.len() as f64);
    }
    Ok(TrainOutcome { model, loss_history })
}

/// Trains one model on every manifest record at noise level `sigma`.
pub fn train(manifest: &DatasetManifest, sigma: f64, config: &TrainConfig) -> Result<TrainOutcome, CnnError> {
    let mut examples = Vec::new();
    for rec in manifest.at_sigma(sigma) {
        let ex = manifest.example(rec);
        examples.push((load_image(&ex.noisy_path)?, ex.lambda_star));
    }
    train_examples(&examples, sigma, config)
}
