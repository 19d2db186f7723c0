use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};

/// Provenance block embedded in every report this tool writes.
#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    pub command_line: String,
    pub tool_version: String,
    pub timestamp: String,
    /// Input path to SHA-256 hex digest.
    pub input_hashes: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub threads: usize,
}

impl RunManifest {
    pub fn new(threads: usize) -> Self {
        RunManifest {
            command_line: std::env::args().collect::<Vec<_>>().join(" "),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            input_hashes: BTreeMap::new(),
            seed: None,
            threads,
        }
    }

    /// Reads `path`, records its digest and returns the contents.
    pub fn read_input(&mut self, path: &Path) -> Result<String> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.input_hashes
            .insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    pub fn to_json(&self) -> Json {
        let mut m = json!({
            "command_line": self.command_line,
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
            "input_hashes": self.input_hashes,
            "threads": self.threads,
        });
        if let Some(seed) = self.seed {
            m["seed"] = json!(seed);
        }
        m
    }

    /// `report` with this manifest attached under `"manifest"`.
    pub fn attach(&self, mut report: Json) -> Json {
        if let Some(obj) = report.as_object_mut() {
            obj.insert("manifest".into(), self.to_json());
        }
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn hashes_inputs() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"abc").unwrap();
        let mut m = RunManifest::new(1);
        assert_eq!(m.read_input(f.path()).unwrap(), "abc");
        let digest = m.input_hashes.values().next().unwrap();
        assert_eq!(digest, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn attaches_seed_only_when_set() {
        let mut m = RunManifest::new(2);
        let r = m.attach(json!({"type": "vc"}));
        assert!(r["manifest"].get("seed").is_none());
        m.seed = Some(9);
        assert_eq!(m.attach(json!({}))["manifest"]["seed"], json!(9));
    }
}
