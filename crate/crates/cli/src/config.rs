//! Run configuration: JSON config file, command-line overrides (flags win),
//! and the fully resolved snapshot echoed at startup and embedded in
//! checkpoints.

use serde::{Deserialize, Serialize};

use mixsent_core::ensemble::EnsembleMode;
use mixsent_core::train::TrainConfig;

use crate::error::CliError;

/// Partial configuration as read from a JSON file; absent keys fall back to
/// defaults, command-line flags override both.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub adam_eps: Option<f64>,
    pub dropout_rate: Option<f64>,
    pub max_len: Option<usize>,
    pub vocab_size: Option<usize>,
    pub embed_dim: Option<usize>,
    pub hidden_size: Option<usize>,
    pub filter_count: Option<usize>,
    pub share_embedding: Option<bool>,
    pub ensemble_mode: Option<String>,
    pub early_stop_patience: Option<usize>,
}

/// Command-line overrides; identical shape, highest precedence.
pub type Overrides = ConfigFile;

/// Fully resolved configuration, serialized into run logs and checkpoint
/// headers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigDto {
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
    pub ensemble_mode: String,
    pub early_stop_patience: usize,
}

pub fn mode_to_str(mode: EnsembleMode) -> &'static str {
    match mode {
        EnsembleMode::Product => "product",
        EnsembleMode::WeightedAverage => "weighted_average",
    }
}

pub fn mode_from_str(s: &str) -> Result<EnsembleMode, CliError> {
    match s {
        "product" => Ok(EnsembleMode::Product),
        "weighted_average" => Ok(EnsembleMode::WeightedAverage),
        other => Err(CliError::Usage(format!(
            "unknown ensemble_mode `{other}` (expected `product` or `weighted_average`)"
        ))),
    }
}

impl From<&TrainConfig> for ConfigDto {
    fn from(cfg: &TrainConfig) -> Self {
        Self {
            seed: cfg.seed,
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            learning_rate: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            adam_eps: cfg.adam_eps,
            dropout_rate: cfg.dropout_rate,
            max_len: cfg.max_len,
            vocab_size: cfg.vocab_size,
            embed_dim: cfg.embed_dim,
            hidden_size: cfg.hidden_size,
            filter_count: cfg.filter_count,
            share_embedding: cfg.share_embedding,
            ensemble_mode: mode_to_str(cfg.ensemble_mode).to_string(),
            early_stop_patience: cfg.early_stop_patience,
        }
    }
}

impl ConfigDto {
    pub fn into_train_config(self) -> Result<TrainConfig, CliError> {
        Ok(TrainConfig {
            seed: self.seed,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            adam_eps: self.adam_eps,
            dropout_rate: self.dropout_rate,
            max_len: self.max_len,
            vocab_size: self.vocab_size,
            embed_dim: self.embed_dim,
            hidden_size: self.hidden_size,
            filter_count: self.filter_count,
            share_embedding: self.share_embedding,
            ensemble_mode: mode_from_str(&self.ensemble_mode)?,
            early_stop_patience: self.early_stop_patience,
        })
    }
}

fn apply(cfg: &mut TrainConfig, layer: &ConfigFile) -> Result<(), CliError> {
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = layer.$field {
                cfg.$field = v;
            }
        };
    }
    set!(seed);
    set!(epochs);
    set!(batch_size);
    set!(learning_rate);
    set!(beta1);
    set!(beta2);
    set!(adam_eps);
    set!(dropout_rate);
    set!(max_len);
    set!(vocab_size);
    set!(embed_dim);
    set!(hidden_size);
    set!(filter_count);
    set!(share_embedding);
    set!(early_stop_patience);
    if let Some(mode) = &layer.ensemble_mode {
        cfg.ensemble_mode = mode_from_str(mode)?;
    }
    Ok(())
}

/// Defaults ← config file ← flags, then validated.
pub fn resolve(file: Option<&str>, overrides: &Overrides) -> Result<TrainConfig, CliError> {
    let mut cfg = TrainConfig::default();
    if let Some(text) = file {
        let parsed: ConfigFile = serde_json::from_str(text)
            .map_err(|e| CliError::Data(format!("config file: {e}")))?;
        apply(&mut cfg, &parsed)?;
    }
    apply(&mut cfg, overrides)?;
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values_which_override_defaults() {
        let file = r#"{"epochs": 7, "learning_rate": 0.5}"#;
        let overrides = Overrides {
            learning_rate: Some(0.25),
            ..Overrides::default()
        };
        let cfg = resolve(Some(file), &overrides).unwrap();
        assert_eq!(cfg.epochs, 7);
        assert_eq!(cfg.learning_rate, 0.25);
        assert_eq!(cfg.batch_size, TrainConfig::default().batch_size);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = resolve(Some(r#"{"epoch": 3}"#), &Overrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn invalid_values_fail_validation_with_usage_code() {
        let err = resolve(Some(r#"{"dropout_rate": 1.5}"#), &Overrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn ensemble_mode_round_trips_through_the_dto() {
        let cfg = TrainConfig {
            ensemble_mode: EnsembleMode::WeightedAverage,
            ..TrainConfig::default()
        };
        let dto = ConfigDto::from(&cfg);
        assert_eq!(dto.ensemble_mode, "weighted_average");
        let back = dto.into_train_config().unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn bad_mode_string_is_a_usage_error() {
        let err = resolve(Some(r#"{"ensemble_mode": "mean"}"#), &Overrides::default())
            .unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
