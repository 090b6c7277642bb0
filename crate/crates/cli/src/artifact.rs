//! On-disk artifacts written by the commands.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use chordlm::chord::vocabulary_hash;
use chordlm::corpus::CorpusSplit;
use chordlm::eval::{LanguageModel, UniformModel};
use chordlm::neural::{NeuralConfig, NeuralModel, NeuralParameters};
use chordlm::ngram::{NGramFile, NGramModel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::manifest::RunManifest;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitArtifact {
    pub manifest: RunManifest,
    pub vocabulary: String,
    pub split: CorpusSplit,
}

pub fn load_split(path: &Path) -> Result<SplitArtifact> {
    let artifact: SplitArtifact = read_json(path)?;
    if artifact.vocabulary != vocabulary_hash() {
        bail!(chordlm::Error::VocabularyMismatch {
            model: vocabulary_hash(),
            corpus: artifact.vocabulary,
        });
    }
    Ok(artifact)
}

pub const NEURAL_FORMAT: &str = "chordlm-neural";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeuralFile {
    pub format: String,
    pub version: u32,
    pub vocabulary: String,
    pub config: NeuralConfig,
    pub params: NeuralParameters,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelPayload {
    Ngram(NGramFile),
    Neural(NeuralFile),
}

impl ModelPayload {
    pub fn from_neural(model: &NeuralModel) -> Self {
        ModelPayload::Neural(NeuralFile {
            format: NEURAL_FORMAT.into(),
            version: 1,
            vocabulary: vocabulary_hash(),
            config: model.config.clone(),
            params: model.params.clone(),
        })
    }

    pub fn vocabulary(&self) -> &str {
        match self {
            ModelPayload::Ngram(f) => &f.vocabulary,
            ModelPayload::Neural(f) => &f.vocabulary,
        }
    }

    pub fn into_model(self) -> Result<Box<dyn LanguageModel>> {
        Ok(match self {
            ModelPayload::Ngram(f) => Box::new(NGramModel::from_file(&f)?),
            ModelPayload::Neural(f) => {
                if f.format != NEURAL_FORMAT || f.version != 1 {
                    bail!(chordlm::Error::Format(format!("{} v{}", f.format, f.version)));
                }
                Box::new(NeuralModel {
                    config: f.config,
                    params: f.params,
                })
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub manifest: RunManifest,
    pub model: ModelPayload,
}

/// Loads a model file, or the built-in `uniform` baseline.
pub fn load_model(spec: &str, vocabulary: &str) -> Result<Box<dyn LanguageModel>> {
    if spec == "uniform" {
        return Ok(Box::new(UniformModel));
    }
    let artifact: ModelArtifact = read_json(Path::new(spec))?;
    if artifact.model.vocabulary() != vocabulary {
        bail!(chordlm::Error::VocabularyMismatch {
            model: artifact.model.vocabulary().to_string(),
            corpus: vocabulary.to_string(),
        });
    }
    artifact.model.into_model()
}
