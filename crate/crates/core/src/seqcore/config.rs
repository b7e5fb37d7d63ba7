use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gru,
    Transformer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionKind {
    Bahdanau,
    LuongDot,
    LuongGeneral,
    LuongConcat,
    LuongLocal,
    Multihead,
}

impl AttentionKind {
    pub fn is_global(self) -> bool {
        matches!(
            self,
            AttentionKind::Bahdanau
                | AttentionKind::LuongDot
                | AttentionKind::LuongGeneral
                | AttentionKind::LuongConcat
        )
    }
}

/// Residual path of a pyramid Transformer layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMode {
    /// Mean of the contracted window.
    #[default]
    Ave,
    /// `tanh(W_aff * window + b_aff)`.
    Aff,
}

fn default_true() -> bool {
    true
}

fn default_window() -> usize {
    2
}

fn default_local_score() -> AttentionKind {
    AttentionKind::LuongGeneral
}

/// Architecture of a seq2seq model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    pub attention: AttentionKind,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub d_model: usize,
    #[serde(default)]
    pub d_ff: usize,
    #[serde(default)]
    pub heads: usize,
    pub pyramid: bool,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub residual_mode: ResidualMode,
    pub vocab_size: usize,
    /// Gaussian width for local attention; `None` means `max(2, S / 10)`.
    #[serde(default)]
    pub local_sigma: Option<f64>,
    /// Global scorer whose weights local attention damps.
    #[serde(default = "default_local_score")]
    pub local_score: AttentionKind,
    /// Post-norm after each residual add (Transformer only).
    #[serde(default = "default_true")]
    pub layer_norm: bool,
    /// Normalize Bahdanau scores by their sum instead of a softmax.
    #[serde(default)]
    pub bahdanau_sum_normalization: bool,
}

impl ModelConfig {
    pub fn gru(attention: AttentionKind, layers: usize, d_model: usize, vocab_size: usize) -> Self {
        ModelConfig {
            family: Family::Gru,
            attention,
            encoder_layers: layers,
            decoder_layers: layers,
            d_model,
            d_ff: 0,
            heads: 0,
            pyramid: true,
            window: 2,
            residual_mode: ResidualMode::Ave,
            vocab_size,
            local_sigma: None,
            local_score: AttentionKind::LuongGeneral,
            layer_norm: true,
            bahdanau_sum_normalization: false,
        }
    }

    pub fn transformer(layers: usize, d_model: usize, heads: usize, vocab_size: usize) -> Self {
        ModelConfig {
            family: Family::Transformer,
            attention: AttentionKind::Multihead,
            encoder_layers: layers,
            decoder_layers: layers,
            d_model,
            d_ff: 2 * d_model,
            heads,
            pyramid: true,
            window: 2,
            residual_mode: ResidualMode::Ave,
            vocab_size,
            local_sigma: None,
            local_score: AttentionKind::LuongGeneral,
            layer_norm: true,
            bahdanau_sum_normalization: false,
        }
    }

    pub fn with_pyramid(mut self, on: bool) -> Self {
        self.pyramid = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.encoder_layers == 0 || self.decoder_layers == 0 {
            return err("encoder_layers and decoder_layers must be >= 1".into());
        }
        if self.d_model == 0 {
            return err("d_model must be > 0".into());
        }
        if self.window < 2 {
            return err(format!("window must be >= 2, got {}", self.window));
        }
        if self.vocab_size < 4 {
            return err("vocab_size must include the 4 reserved tokens".into());
        }
        if let Some(s) = self.local_sigma {
            if !(s > 0.0) {
                return err(format!("local_sigma must be > 0, got {s}"));
            }
        }
        match self.family {
            Family::Gru => {
                if self.attention == AttentionKind::Multihead {
                    return err("multihead attention requires family = transformer".into());
                }
                if self.attention == AttentionKind::LuongLocal && !self.local_score.is_global() {
                    return err("local_score must be a global scorer".into());
                }
            }
            Family::Transformer => {
                if self.attention != AttentionKind::Multihead {
                    return err("transformer family uses attention = multihead".into());
                }
                if self.heads == 0 || self.d_model % self.heads != 0 {
                    return err(format!(
                        "heads ({}) must divide d_model ({})",
                        self.heads, self.d_model
                    ));
                }
                if self.d_ff == 0 {
                    return err("d_ff must be > 0".into());
                }
            }
        }
        Ok(())
    }

    /// Encoder memory length for a source of `len` tokens.
    pub fn memory_len(&self, len: usize) -> usize {
        if self.pyramid {
            super::output_length(len, self.encoder_layers, self.window)
        } else {
            len
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_heads_not_dividing_width() {
        let mut c = ModelConfig::transformer(2, 30, 4, 20);
        assert!(c.validate().is_err());
        c.heads = 5;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_family_attention_mismatch() {
        let mut c = ModelConfig::gru(AttentionKind::Multihead, 2, 8, 20);
        assert!(c.validate().is_err());
        c.attention = AttentionKind::LuongDot;
        assert!(c.validate().is_ok());
        c.local_sigma = Some(0.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let json = r#"{"family":"gru","attention":"bahdanau","encoder_layers":2,
            "decoder_layers":2,"d_model":8,"pyramid":true,"vocab_size":10,"bogus":1}"#;
        let e = serde_json::from_str::<ModelConfig>(json).unwrap_err();
        assert!(e.to_string().contains("bogus"));
    }
}
