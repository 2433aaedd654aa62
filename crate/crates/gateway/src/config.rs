//! Optional TOML settings file. Command-line flags win over the file, the
//! file wins over built-in defaults.
//!
//! ```toml
//! bundle = "bundle"
//! bind = "127.0.0.1:8080"
//! log = "transcripts.jsonl"
//! seed = 0
//! threshold = 0.9
//! top_k = 3
//! smoothing_k = 0.1
//! ```

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub bundle: Option<PathBuf>,
    pub bind: Option<String>,
    pub log: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub top_k: Option<usize>,
    pub smoothing_k: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
