//! Run manifests.
//!
//! Every command writes a manifest into its output directory before any
//! other output, capturing the inputs, configuration snapshot and seed so a
//! run can be reproduced exactly. Manifests contain no timestamps; rerunning
//! a command from one yields byte-identical outputs in serial mode.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;
use crate::state::write_atomic;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<String>,
    pub out_dir: String,
    pub seed: Option<u64>,
    /// Command-specific configuration snapshot.
    pub config: Value,
}

impl RunManifest {
    pub fn new(command: &str, inputs: &[&Path], out_dir: &Path, seed: Option<u64>, config: Value) -> Self {
        RunManifest {
            tool: "monsoon".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            out_dir: out_dir.display().to_string(),
            seed,
            config,
        }
    }

    /// Serialize to `<out_dir>/manifest.json`.
    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(&path, text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = RunManifest::new(
            "fit",
            &[Path::new("data.csv")],
            dir.path(),
            Some(42),
            serde_json::json!({"sweeps": 100}),
        );
        manifest.write(dir.path()).unwrap();
        let first = std::fs::read(dir.path().join("manifest.json")).unwrap();
        manifest.write(dir.path()).unwrap();
        let second = std::fs::read(dir.path().join("manifest.json")).unwrap();
        assert_eq!(first, second);
        let back: RunManifest = serde_json::from_slice(&first).unwrap();
        assert_eq!(back.command, "fit");
        assert_eq!(back.seed, Some(42));
    }
}
