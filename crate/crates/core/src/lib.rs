//! Chord-sequence language modelling: chord vocabulary and corpus handling,
//! smoothed n-gram baselines, recurrent networks, Hyperband search and
//! evaluation.

pub mod chord;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod hyperopt;
pub mod neural;
pub mod ngram;
pub mod seed;
pub mod synth;
pub mod tensor;

pub use chord::{ChordClass, Mode, PitchClass, Token, NUM_TOKENS, VOCAB_SIZE};
pub use corpus::{AnnotatedSong, ChordSequence, CorpusSplit};
pub use error::{Error, Result};
pub use eval::LanguageModel;
pub use ngram::NGramModel;
