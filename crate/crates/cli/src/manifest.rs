//! Run manifests: one JSON file next to the outputs of every
//! artifact-producing command, recording what produced them.

use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::CliError;

pub struct RunManifest {
    command: String,
    config: serde_json::Value,
    seed: u64,
    inputs: Vec<(String, String)>,
    outputs: Vec<String>,
    started: Instant,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    /// Records an input file with its content hash.
    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| anyhow::anyhow!("hashing input {}: {e}", path.display()))?;
        let digest = Sha256::digest(&bytes);
        self.inputs
            .push((path.display().to_string(), hex::encode(digest)));
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Writes `manifest.json` into `dir` (atomic).
    pub fn write(self, dir: &Path) -> Result<PathBuf, CliError> {
        let value = serde_json::json!({
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
            "input_hashes": self.inputs.iter().map(|(p, h)| {
                serde_json::json!({"path": p, "sha256": h})
            }).collect::<Vec<_>>(),
            "outputs": self.outputs,
            "wall_seconds": self.started.elapsed().as_secs_f64(),
        });
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&value).expect("manifest is valid json");
        msinet::weights::write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}
