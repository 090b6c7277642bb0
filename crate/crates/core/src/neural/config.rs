use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chord::VOCAB_SIZE;
use crate::embedding::{EmbeddingKind, SkipGramConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Simple,
    Lstm,
    Gru,
}

impl CellKind {
    /// Number of stacked pre-activation blocks per layer.
    pub fn gates(self) -> usize {
        match self {
            CellKind::Simple => 1,
            CellKind::Gru => 3,
            CellKind::Lstm => 4,
        }
    }

    pub const ALL: [CellKind; 3] = [CellKind::Simple, CellKind::Lstm, CellKind::Gru];
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellKind::Simple => "simple",
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        })
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simple" | "rnn" => Ok(CellKind::Simple),
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            _ => Err(Error::InvalidConfig(format!("unknown cell type {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub kind: EmbeddingKind,
    /// Ignored for one-hot, which is always 25 wide.
    pub dim: usize,
}

impl EmbeddingSpec {
    pub fn one_hot() -> Self {
        EmbeddingSpec {
            kind: EmbeddingKind::OneHot,
            dim: VOCAB_SIZE,
        }
    }

    pub fn width(&self) -> usize {
        match self.kind {
            EmbeddingKind::OneHot => VOCAB_SIZE,
            _ => self.dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralConfig {
    pub cell: CellKind,
    pub num_layers: usize,
    pub hidden_size: usize,
    pub embedding: EmbeddingSpec,
    pub skip_connections: bool,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub seed: u64,
    /// Settings for pre-training when `embedding.kind` is skip-gram.
    #[serde(default)]
    pub skipgram: SkipGramSettings,
}

/// Skip-gram settings other than the dimension, which comes from the embedding spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipGramSettings {
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for SkipGramSettings {
    fn default() -> Self {
        let d = SkipGramConfig::default();
        SkipGramSettings {
            window: d.window,
            negatives: d.negatives,
            epochs: d.epochs,
            learning_rate: d.learning_rate,
        }
    }
}

pub const DEFAULT_BATCH_SIZE: usize = 4;
pub const DEFAULT_PATIENCE: usize = 15;
pub const DEFAULT_MAX_EPOCHS: usize = 1000;
pub const DEFAULT_CLIP_NORM: f64 = 5.0;

impl NeuralConfig {
    pub fn new(cell: CellKind, num_layers: usize, hidden_size: usize) -> Self {
        NeuralConfig {
            cell,
            num_layers,
            hidden_size,
            embedding: EmbeddingSpec::one_hot(),
            skip_connections: false,
            learning_rate: 1e-3,
            batch_size: DEFAULT_BATCH_SIZE,
            patience: DEFAULT_PATIENCE,
            max_epochs: DEFAULT_MAX_EPOCHS,
            clip_norm: Some(DEFAULT_CLIP_NORM),
            seed: 0,
            skipgram: SkipGramSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.num_layers == 0 || self.hidden_size == 0 {
            return fail("num_layers and hidden_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning rate must be positive");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return fail("batch_size and max_epochs must be positive");
        }
        if self.embedding.kind != EmbeddingKind::OneHot && self.embedding.dim == 0 {
            return fail("embedding dim must be positive");
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return fail("clip norm must be positive");
            }
        }
        Ok(())
    }

    pub fn skipgram_config(&self) -> SkipGramConfig {
        SkipGramConfig {
            dim: self.embedding.dim,
            window: self.skipgram.window,
            negatives: self.skipgram.negatives,
            epochs: self.skipgram.epochs,
            learning_rate: self.skipgram.learning_rate,
            seed: crate::seed::derive_seed(self.seed, "skip-gram"),
        }
    }

    /// Hex digest of the canonical JSON form; used for tie-breaking and file names.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
