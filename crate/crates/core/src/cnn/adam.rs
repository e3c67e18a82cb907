use super::model::{CnnModel, Gradients};
use super::{CnnError, TrainConfig};

/// Per-parameter first and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(model: &CnnModel) -> Self {
        let zeros: Vec<Vec<f64>> = model.tensors().map(|t| vec![0.0; t.len()]).collect();
        Self { m: zeros.clone(), v: zeros, t: 0 }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(
    model: &mut CnnModel,
    grads: &Gradients,
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<(), CnnError> {
    let shapes_match = model.tensors().count() == state.m.len()
        && grads.tensors().count() == state.m.len()
        && model
            .tensors()
            .zip(grads.tensors())
            .zip(&state.m)
            .all(|((p, g), m)| p.len() == g.len() && p.len() == m.len());
    if !shapes_match {
        return Err(CnnError::ShapeMismatch("gradients or optimizer state do not match model".into()));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - config.beta1.powi(t);
    let c2 = 1.0 - config.beta2.powi(t);
    for (((p, g), m), v) in model.tensors_mut().zip(grads.tensors()).zip(&mut state.m).zip(&mut state.v) {
        for i in 0..p.len() {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }
    Ok(())
}
