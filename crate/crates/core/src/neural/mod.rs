//! Recurrent chord language models.

pub mod adam;
pub mod config;
pub mod network;
pub mod train;

pub use config::{CellKind, EmbeddingSpec, NeuralConfig};
pub use network::{backward, forward, predict_log_probs, Batch, NeuralParameters};
pub use train::{fine_tune, train, CheckpointFile, EarlyStopping, NeuralModel, StopReason, TrainReport, Trainer};
