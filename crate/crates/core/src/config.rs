//! Encoder dimensions and task heads.

use alloc::format;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position ids start here; ids below it are reserved by the embedding table.
pub const POSITION_OFFSET: usize = 2;

/// Dimensional description of the encoder. Shapes and censuses derive from it
/// alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden: usize,
    pub num_heads: usize,
    pub ffn_inner: usize,
    pub vocab_size: usize,
    pub max_positions: usize,
    pub type_vocab: usize,
    pub dropout: f64,
    pub layer_norm_eps: f64,
    /// Standard deviation of the truncated-normal backbone initialization.
    #[serde(default = "default_initializer_range")]
    pub initializer_range: f64,
}

fn default_initializer_range() -> f64 {
    0.02
}

impl ModelConfig {
    /// RoBERTa-base dimensions.
    pub fn roberta_base() -> Self {
        ModelConfig {
            num_layers: 12,
            hidden: 768,
            num_heads: 12,
            ffn_inner: 3072,
            vocab_size: 50265,
            max_positions: 514,
            type_vocab: 1,
            dropout: 0.1,
            layer_norm_eps: 1e-5,
            initializer_range: 0.02,
        }
    }

    /// Two-layer, 16-wide shape used by most tests. Its wider init keeps the
    /// frozen random features informative enough to train a head on.
    pub fn tiny() -> Self {
        ModelConfig {
            num_layers: 2,
            hidden: 16,
            num_heads: 2,
            ffn_inner: 32,
            vocab_size: 100,
            max_positions: 64,
            type_vocab: 1,
            dropout: 0.1,
            layer_norm_eps: 1e-5,
            initializer_range: 0.15,
        }
    }

    /// Named shapes: `roberta-base-shape` and `tiny`.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "roberta-base-shape" | "roberta-base" => Some(Self::roberta_base()),
            "tiny" => Some(Self::tiny()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("num_layers", self.num_layers),
            ("hidden", self.hidden),
            ("num_heads", self.num_heads),
            ("ffn_inner", self.ffn_inner),
            ("type_vocab", self.type_vocab),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.hidden % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "hidden {} not divisible by num_heads {}",
                self.hidden, self.num_heads
            )));
        }
        if self.vocab_size <= crate::tokenizer::RESERVED_IDS {
            return Err(Error::Config(format!(
                "vocab_size must exceed the {} reserved ids",
                crate::tokenizer::RESERVED_IDS
            )));
        }
        if self.max_positions <= POSITION_OFFSET {
            return Err(Error::Config(format!(
                "max_positions must exceed the position offset {POSITION_OFFSET}"
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        if !(self.initializer_range >= 0.0 && self.initializer_range.is_finite()) {
            return Err(Error::Config("initializer_range must be finite and non-negative".into()));
        }
        if !(self.layer_norm_eps > 0.0) {
            return Err(Error::Config("layer_norm_eps must be positive".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.num_heads
    }

    /// Longest sequence (including prepended prompt rows) the position table
    /// can index.
    pub fn max_sequence(&self) -> usize {
        self.max_positions - POSITION_OFFSET
    }
}

/// Output head placed on top of the encoder. Heads are trainable and kept out
/// of adapter censuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TaskHead {
    /// Pooled first position to `classes` logits.
    Classifier { classes: usize },
    /// Pooled first position to one real score.
    Regression,
    /// Per-position start and end logits.
    Span,
}

impl TaskHead {
    /// Rows of the head's output projection.
    pub fn outputs(&self) -> usize {
        match *self {
            TaskHead::Classifier { classes } => classes,
            TaskHead::Regression => 1,
            TaskHead::Span => 2,
        }
    }

    pub fn param_count(&self, hidden: usize) -> u64 {
        let out = self.outputs() as u64;
        out * hidden as u64 + out
    }
}
