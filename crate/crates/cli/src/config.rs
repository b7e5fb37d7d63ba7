//! Flat TOML run configuration: model and training keys in one table.

use std::fs;
use std::path::Path;

use pyrfix::harness::TrainConfig;
use pyrfix::seqcore::ModelConfig;

use crate::CliError;

const MODEL_KEYS: &[&str] = &[
    "family",
    "attention",
    "encoder_layers",
    "decoder_layers",
    "d_model",
    "d_ff",
    "heads",
    "pyramid",
    "window",
    "residual_mode",
    "vocab_size",
    "local_sigma",
    "local_score",
    "layer_norm",
    "bahdanau_sum_normalization",
];

const TRAIN_KEYS: &[&str] = &[
    "epochs",
    "batch_size",
    "lr",
    "lr_decay",
    "beta1",
    "beta2",
    "eps",
    "teacher_forcing_ratio",
    "clip_norm",
    "seed",
    "patience",
];

const CLASSIFIER_KEYS: &[&str] = &["n_class", "frozen", "reinit_last"];

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: Option<toml::Table>,
    pub train: TrainConfig,
    pub classifier: toml::Table,
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let table: toml::Table = text.parse().map_err(|e| CliError::usage(format!("config: {e}")))?;
    let (mut model, mut train, mut classifier) = (toml::Table::new(), toml::Table::new(), toml::Table::new());
    for (k, v) in table {
        if MODEL_KEYS.contains(&k.as_str()) {
            model.insert(k, v);
        } else if TRAIN_KEYS.contains(&k.as_str()) {
            train.insert(k, v);
        } else if CLASSIFIER_KEYS.contains(&k.as_str()) {
            classifier.insert(k, v);
        } else {
            return Err(CliError::usage(format!("unknown config key `{k}`")));
        }
    }
    let train: TrainConfig = toml::Value::Table(train)
        .try_into()
        .map_err(|e| CliError::usage(format!("config: {e}")))?;
    train.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(RunConfig {
        model: (!model.is_empty()).then_some(model),
        train,
        classifier,
    })
}

impl RunConfig {
    /// Model config with `vocab_size` filled from the vocabulary when the
    /// file leaves it out.
    pub fn model_config(&self, vocab_size: usize) -> Result<ModelConfig, CliError> {
        let mut t = self
            .model
            .clone()
            .ok_or_else(|| CliError::usage("config has no model keys (family, d_model, ...)"))?;
        t.entry("vocab_size").or_insert(toml::Value::Integer(vocab_size as i64));
        if t.get("family").and_then(|f| f.as_str()) == Some("transformer") {
            t.entry("attention").or_insert_with(|| "multihead".into());
        }
        let cfg: ModelConfig = toml::Value::Table(t)
            .try_into()
            .map_err(|e| CliError::usage(format!("config: {e}")))?;
        cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = r#"
family = "gru"
attention = "bahdanau"
encoder_layers = 2
decoder_layers = 2
d_model = 8
pyramid = true
epochs = 3
batch_size = 4
"#;

    #[test]
    fn splits_model_and_training_keys() {
        let c = parse(TOY).unwrap();
        assert_eq!(c.train.epochs, 3);
        let m = c.model_config(20).unwrap();
        assert_eq!((m.d_model, m.vocab_size), (8, 20));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse(&format!("{TOY}\nbogus_key = 1\n")).unwrap_err();
        assert_eq!(err.code(), 2);
        assert!(err.to_string().contains("bogus_key"));
    }

    #[test]
    fn bad_values_are_usage_errors() {
        assert!(parse("batch_size = 0").is_err());
        let c = parse("family = \"gru\"\nd_model = 8").unwrap();
        assert!(c.model_config(10).is_err());
    }
}
