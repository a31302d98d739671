//! Distribution-prediction training: spatial softmax normalization, the
//! divergence loss, Adam, and an online (batch size 1) epoch loop that
//! keeps the checkpoint with the lowest validation divergence.

use indexmap::IndexMap;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::map::{Map2d, SaliencyMap};
use crate::model::Model;
use crate::ops;
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct TrainConfig {
    /// Adam step size. 1e-6 is the full-scale setting; small desk-scale
    /// models train fine up to 1e-3.
    pub learning_rate: f64,
    pub epochs: usize,
    /// Regularization constant of the divergence loss.
    pub epsilon_kld: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-6,
            epochs: 10,
            epsilon_kld: 1e-7,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::InvalidConfig("adam betas must lie in [0, 1)".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-image spatial softmax of a raw `[B, 1, H, W]` map: strictly positive
/// values with unit sum. The max shift makes overflow impossible.
pub fn normalize_output(raw: &Tensor) -> Result<Vec<SaliencyMap>> {
    let [b, _, h, w] = raw.dims4()?;
    let data = ops::softmax_forward(raw.data(), b);
    (0..b)
        .map(|bi| {
            let plane = data[bi * h * w..(bi + 1) * h * w].to_vec();
            SaliencyMap::new(Map2d::new(h, w, plane)?)
        })
        .collect()
}

/// The divergence of Eq-style form `sum_i q_i ln(eps + q_i / (eps + p_i))`.
pub fn kld_value(p: &SaliencyMap, q: &SaliencyMap, eps: f64) -> Result<f64> {
    if !p.same_shape(q) {
        return Err(Error::ShapeMismatch {
            op: "kld",
            detail: format!(
                "{}x{} vs {}x{}",
                p.height, p.width, q.height, q.width
            ),
        });
    }
    Ok(ops::kld_sum(p.data(), q.data(), eps))
}

/// First/second moment estimates per parameter plus the shared step count.
pub struct AdamState {
    moments: IndexMap<String, (Vec<f64>, Vec<f64>)>,
    pub t: u64,
}

impl AdamState {
    pub fn new(model: &Model) -> AdamState {
        let moments = model
            .params()
            .iter()
            .map(|(name, tensor)| {
                (
                    name.clone(),
                    (vec![0.0; tensor.numel()], vec![0.0; tensor.numel()]),
                )
            })
            .collect();
        AdamState { moments, t: 0 }
    }

    /// One bias-corrected Adam update. `grads` maps parameter names to
    /// gradient slices; parameters without an entry are left untouched.
    pub fn step(
        &mut self,
        model: &mut Model,
        grads: &IndexMap<String, &[f64]>,
        config: &TrainConfig,
    ) {
        self.t += 1;
        let bc1 = 1.0 - config.adam_beta1.powi(self.t as i32);
        let bc2 = 1.0 - config.adam_beta2.powi(self.t as i32);
        for (name, grad) in grads {
            let (m, v) = self.moments.get_mut(name).expect("unknown parameter");
            let param = model.param_mut(name).expect("unknown parameter");
            let data = param.data_mut();
            for i in 0..data.len() {
                let g = grad[i];
                m[i] = config.adam_beta1 * m[i] + (1.0 - config.adam_beta1) * g;
                v[i] = config.adam_beta2 * v[i] + (1.0 - config.adam_beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                data[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_eps);
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_train_kld: f64,
    pub val_kld: f64,
    pub wall_seconds: f64,
}

pub struct TrainReport {
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_kld: f64,
}

impl TrainReport {
    /// CSV rows: epoch, mean_train_kld, val_kld, wall_seconds.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mean_train_kld,val_kld,wall_seconds\n");
        for row in &self.log {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.3}\n",
                row.epoch, row.mean_train_kld, row.val_kld, row.wall_seconds
            ));
        }
        out
    }
}

/// Runs one gradient step on a single sample; returns the loss.
pub fn train_step(
    model: &mut Model,
    adam: &mut AdamState,
    sample: &Sample,
    config: &TrainConfig,
) -> Result<f64> {
    let mut pass = model.forward_pass(&sample.image_batch(), true)?;
    let target = pass.graph.leaf(sample.density_batch());
    let normalized = pass.graph.softmax_norm(pass.output)?;
    let loss_id = pass.graph.kld_loss(normalized, target, config.epsilon_kld)?;
    let loss = pass.graph.tensor(loss_id).item();
    pass.graph.backward(loss_id)?;
    let grads: IndexMap<String, &[f64]> = pass
        .param_ids
        .iter()
        .filter_map(|(name, &id)| pass.graph.grad(id).map(|g| (name.clone(), g)))
        .collect();
    adam.step(model, &grads, config);
    Ok(loss)
}

/// Validation loss: mean divergence between normalized predictions and the
/// ground-truth densities.
pub fn evaluate_kld(model: &Model, samples: &[Sample], eps: f64) -> Result<f64> {
    let mut total = 0.0;
    for sample in samples {
        let raw = model.forward(&sample.image_batch())?;
        let prediction = normalize_output(&raw)?.remove(0);
        total += kld_value(&prediction, &sample.density, eps)?;
    }
    Ok(total / samples.len() as f64)
}

/// Online training over a seeded shuffle per epoch. After each epoch the
/// validation divergence is measured and the best-performing weights are
/// retained; the model holds those weights when this returns.
pub fn train(
    model: &mut Model,
    train_set: &[Sample],
    val_set: &[Sample],
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    assert!(!train_set.is_empty() && !val_set.is_empty(), "empty dataset");
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(model);
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, IndexMap<String, Tensor>)> = None;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=config.epochs {
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let mut train_total = 0.0;
        for &idx in &order {
            let loss = train_step(model, &mut adam, &train_set[idx], config)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    value: loss,
                    epoch,
                    sample: idx,
                });
            }
            train_total += loss;
        }
        let val_kld = evaluate_kld(model, val_set, config.epsilon_kld)?;
        log.push(EpochLog {
            epoch,
            mean_train_kld: train_total / order.len() as f64,
            val_kld,
            wall_seconds: started.elapsed().as_secs_f64(),
        });
        if best.as_ref().is_none_or(|(_, b, _)| val_kld < *b) {
            best = Some((epoch, val_kld, model.params().clone()));
        }
    }

    let (best_epoch, best_val_kld, params) = best.unwrap();
    model.set_params(params);
    Ok(TrainReport {
        log,
        best_epoch,
        best_val_kld,
    })
}

/// Loads base weights, then trains with the given (unchanged) optimization
/// parameters.
pub fn finetune(
    model: &mut Model,
    base_weights: impl AsRef<std::path::Path>,
    train_set: &[Sample],
    val_set: &[Sample],
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    crate::weights::load_weights(model, base_weights, false)?;
    train(model, train_set, val_set, config)
}
