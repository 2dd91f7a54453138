//! One manifest per artifact directory: what ran, with which seeds and
//! config, reading and writing which files.

use std::fs;
use std::path::Path;

use jamwatch_core::Result;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// RFC 3339 UTC; the only field expected to differ between reruns.
    pub created_utc: String,
    pub seed: Option<u64>,
    pub config: Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config: Value) -> Self {
        RunManifest {
            tool: "jamwatch".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            created_utc: chrono::Utc::now().to_rfc3339(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn with_inputs(mut self, inputs: &[&Path]) -> Self {
        self.inputs = inputs.iter().map(|p| p.display().to_string()).collect();
        self
    }

    pub fn with_outputs(mut self, outputs: &[&Path]) -> Self {
        self.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
        self
    }

    /// Writes `manifest.json` into the artifact directory.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| jamwatch_core::Error::Format(format!("manifest encode: {e}")))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }
}
