//! Run manifests: enough to re-run a command and reproduce its artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "chordlm";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Command line after the program name; `chordlm replay` re-parses it.
    pub args: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<PathBuf>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

impl RunManifest {
    pub fn new(command: &str, args: &[String]) -> Self {
        RunManifest {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            args: args.to_vec(),
            seeds: BTreeMap::new(),
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn seed(mut self, name: &str, value: u64) -> Self {
        self.seeds.insert(name.into(), value);
        self
    }

    pub fn config<T: Serialize>(mut self, config: &T) -> Result<Self> {
        self.config = serde_json::to_value(config)?;
        Ok(self)
    }

    pub fn input(mut self, path: &Path) -> Result<Self> {
        self.inputs.push(InputHash {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        });
        Ok(self)
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.to_path_buf());
        self
    }
}

/// Sidecar manifest path for artifacts that cannot embed one (JSON Lines, CSV).
pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Finds the manifest of an artifact: a `manifest` field of a JSON document,
/// a manifest file itself, or the artifact's sidecar.
pub fn locate(path: &Path) -> Result<RunManifest> {
    let side = sidecar(path);
    if side.exists() {
        let text = fs::read_to_string(&side)?;
        return Ok(serde_json::from_str(&text)?);
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("{} is not JSON", path.display()))?;
    let m = match value.get("manifest") {
        Some(m) => m.clone(),
        None => value,
    };
    serde_json::from_value(m).with_context(|| format!("no run manifest in {}", path.display()))
}
