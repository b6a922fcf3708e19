//! Mini-batch training of the joint model: seeded shuffling, inverted
//! dropout, Adam updates and best-checkpoint tracking on validation
//! weighted F1.
//!
//! Determinism contract: a seed fixes initialization, shuffling and dropout
//! masks, and all reductions run in a fixed order, so equal runs produce
//! identical parameter bits and logs.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::EmbeddingTable;
use crate::ensemble::EnsembleMode;
use crate::mathfn;
use crate::metrics::{confusion, metrics};
use crate::model::{
    forward_example, mask_frozen_gradients, train_step_example, DropoutMasks, Example, ModelDims,
    ModelError, ModelParams,
};
use crate::tensor::Tensor;

/// All training hyperparameters. `early_stop_patience` of 0 disables early
/// stopping.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub dropout_rate: f64,
    pub max_len: usize,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_size: usize,
    pub filter_count: usize,
    pub share_embedding: bool,
    pub ensemble_mode: EnsembleMode,
    pub early_stop_patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            dropout_rate: 0.2,
            max_len: 128,
            vocab_size: 8000,
            embed_dim: 64,
            hidden_size: 64,
            filter_count: 64,
            share_embedding: false,
            ensemble_mode: EnsembleMode::Product,
            early_stop_patience: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: {}", self.0)
    }
}

impl core::error::Error for ConfigError {}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        use alloc::format;
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(ConfigError("epochs and batch_size must be positive".into()));
        }
        if self.embed_dim == 0 || self.hidden_size == 0 || self.filter_count == 0 {
            return Err(ConfigError(
                "embed_dim, hidden_size and filter_count must be positive".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(ConfigError(format!(
                "learning_rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(ConfigError(format!(
                "dropout_rate {} must lie in [0, 1)",
                self.dropout_rate
            )));
        }
        if self.max_len < 4 {
            return Err(ConfigError(
                "max_len must be at least 4, the widest filter".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(ConfigError("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.adam_eps > 0.0) {
            return Err(ConfigError("adam_eps must be positive".into()));
        }
        Ok(())
    }

    pub fn dims(&self, vocab: usize) -> ModelDims {
        ModelDims {
            vocab,
            embed_dim: self.embed_dim,
            hidden_size: self.hidden_size,
            filter_count: self.filter_count,
            share_embedding: self.share_embedding,
        }
    }
}

/// One row of the training log CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_weighted_f1: f64,
    pub val_macro_f1: f64,
}

/// Result of a training run: the best parameters by validation weighted F1,
/// the per-epoch log, and where the best score happened.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_weighted_f1: f64,
}

#[derive(Clone, Debug)]
pub enum TrainError {
    EmptyTrainSet,
    EmptyValidationSet,
    UnlabeledExample { uid: String },
    /// Loss stopped being finite; names the epoch and batch.
    NonFiniteLoss { epoch: usize, batch: usize },
    Config(ConfigError),
    Model(ModelError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::EmptyTrainSet => write!(f, "training set is empty"),
            TrainError::EmptyValidationSet => write!(f, "validation set is empty"),
            TrainError::UnlabeledExample { uid } => {
                write!(f, "example `{uid}` has no gold label")
            }
            TrainError::NonFiniteLoss { epoch, batch } => {
                write!(f, "loss became non-finite in epoch {epoch}, batch {batch}")
            }
            TrainError::Config(e) => write!(f, "{e}"),
            TrainError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for TrainError {}

impl From<ConfigError> for TrainError {
    fn from(e: ConfigError) -> Self {
        TrainError::Config(e)
    }
}

impl From<ModelError> for TrainError {
    fn from(e: ModelError) -> Self {
        TrainError::Model(e)
    }
}

/// Adam with bias correction. Moment buffers mirror the parameter tree, so a
/// zero gradient provably leaves its parameter untouched.
pub struct Adam {
    m: ModelParams,
    v: ModelParams,
    step: u64,
}

impl Adam {
    pub fn new(like: &ModelParams) -> Self {
        Self {
            m: like.zeros_like(),
            v: like.zeros_like(),
            step: 0,
        }
    }

    pub fn apply(&mut self, params: &mut ModelParams, grads: &ModelParams, cfg: &TrainConfig) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - libm_free_powi(cfg.beta1, t);
        let bc2 = 1.0 - libm_free_powi(cfg.beta2, t);
        let mut m_tensors = self.m.tensors_mut();
        let mut v_tensors = self.v.tensors_mut();
        let g_tensors = grads.tensors();
        for (((_, p), (_, g)), ((_, m), (_, v))) in params
            .tensors_mut()
            .into_iter()
            .zip(g_tensors)
            .zip(m_tensors.iter_mut().zip(v_tensors.iter_mut()))
        {
            for k in 0..p.numel() {
                let gk = g.data()[k];
                let mk = cfg.beta1 * m.data()[k] + (1.0 - cfg.beta1) * gk;
                let vk = cfg.beta2 * v.data()[k] + (1.0 - cfg.beta2) * gk * gk;
                m.data_mut()[k] = mk;
                v.data_mut()[k] = vk;
                let m_hat = mk / bc1;
                let v_hat = vk / bc2;
                p.data_mut()[k] -= cfg.learning_rate * m_hat / (mathfn::sqrt(v_hat) + cfg.adam_eps);
            }
        }
    }
}

/// Integer power without pulling in a float pow; exponents stay tiny here.
fn libm_free_powi(base: f64, exp: i32) -> f64 {
    let mut acc = 1.0f64;
    let mut b = base;
    let mut e = exp as u32;
    while e > 0 {
        if e & 1 == 1 {
            acc *= b;
        }
        b *= b;
        e >>= 1;
    }
    acc
}

fn sample_mask<R: Rng>(len: usize, rate: f64, rng: &mut R) -> Tensor {
    let keep_scale = 1.0 / (1.0 - rate);
    let mut mask = Tensor::zeros(alloc::vec![len]);
    for v in mask.data_mut() {
        *v = if rng.gen::<f64>() < rate { 0.0 } else { keep_scale };
    }
    mask
}

/// Eval-mode validation metrics under the configured ensemble mode.
fn validation_scores(
    params: &ModelParams,
    val: &[Example],
    mode: EnsembleMode,
) -> Result<(f64, f64), TrainError> {
    let mut golds = Vec::with_capacity(val.len());
    let mut preds = Vec::with_capacity(val.len());
    for example in val {
        let gold = example
            .label
            .ok_or_else(|| TrainError::UnlabeledExample {
                uid: example.uid.clone(),
            })?;
        let out = forward_example(params, &example.seq, mode)?;
        golds.push(gold);
        preds.push(out.prediction.class);
    }
    let cm = confusion(&golds, &preds).expect("validation set is non-empty");
    let report = metrics(&cm).expect("validation set is non-empty");
    Ok((report.weighted_f1, report.macro_f1))
}

/// Full training run. `vocab` is the embedding-table height (the tokenizer's
/// size); `external_embedding`, when given, replaces the random tables after
/// seeded initialization so the random stream stays identical either way.
pub fn train(
    train_set: &[Example],
    val_set: &[Example],
    vocab: usize,
    cfg: &TrainConfig,
    external_embedding: Option<&EmbeddingTable>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptyTrainSet);
    }
    if val_set.is_empty() {
        return Err(TrainError::EmptyValidationSet);
    }
    for example in train_set {
        if example.label.is_none() {
            return Err(TrainError::UnlabeledExample {
                uid: example.uid.clone(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(&cfg.dims(vocab), &mut rng);
    if let Some(table) = external_embedding {
        params.embedding_cnn = table.clone();
        if params.embedding_att.is_some() {
            params.embedding_att = Some(table.clone());
        }
    }
    let mut grads = params.zeros_like();
    let mut adam = Adam::new(&params);

    let mut records = Vec::with_capacity(cfg.epochs);
    let mut best_params = params.clone();
    let mut best_score = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut epochs_since_best = 0usize;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            grads.zero();
            let mut batch_loss = 0.0f64;
            for &i in batch {
                let example = &train_set[i];
                let masks = if cfg.dropout_rate > 0.0 {
                    DropoutMasks {
                        cnn: Some(sample_mask(
                            3 * cfg.filter_count,
                            cfg.dropout_rate,
                            &mut rng,
                        )),
                        attention: Some(sample_mask(
                            2 * cfg.hidden_size,
                            cfg.dropout_rate,
                            &mut rng,
                        )),
                    }
                } else {
                    DropoutMasks::default()
                };
                batch_loss += train_step_example(
                    &params,
                    &example.seq,
                    example.label.expect("checked above"),
                    &masks,
                    &mut grads,
                )?;
            }
            let scale = 1.0 / batch.len() as f64;
            batch_loss *= scale;
            if !batch_loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            for (_, g) in grads.tensors_mut() {
                g.scale(scale);
            }
            mask_frozen_gradients(&mut grads, &params);
            adam.apply(&mut params, &grads, cfg);
            loss_sum += batch_loss * batch.len() as f64;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let (val_weighted_f1, val_macro_f1) =
            validation_scores(&params, val_set, cfg.ensemble_mode)?;
        records.push(EpochRecord {
            epoch,
            train_loss,
            val_weighted_f1,
            val_macro_f1,
        });
        if val_weighted_f1 > best_score {
            best_score = val_weighted_f1;
            best_params = params.clone();
            best_epoch = epoch;
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if cfg.early_stop_patience > 0 && epochs_since_best >= cfg.early_stop_patience {
                break;
            }
        }
    }

    Ok(TrainOutcome {
        params: best_params,
        records,
        best_epoch,
        best_val_weighted_f1: best_score,
    })
}
