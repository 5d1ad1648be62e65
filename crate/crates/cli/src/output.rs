//! Run-directory layout, manifest and structured logging.
//!
//! One directory per run: `config.json` with the exact resolved
//! configuration, `manifest.json` with versions, config hash and wall
//! time, and the command's artifacts. Everything except the manifest
//! (which records timing) is byte-reproducible for a given config.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use causalsel::Result;

use crate::config::RunConfig;

pub struct RunDir {
    pub root: PathBuf,
    command: String,
    config_sha256: String,
    threads: Option<usize>,
    artifacts: Vec<String>,
    started: Instant,
}

impl RunDir {
    /// Create (or reuse) the output directory and write the resolved
    /// config into it.
    pub fn create(root: &Path, command: &str, config: &RunConfig) -> Result<Self> {
        fs::create_dir_all(root)?;
        let config_json = to_pretty_json(config)?;
        fs::write(root.join("config.json"), &config_json)?;
        let mut hasher = Sha256::new();
        hasher.update(config_json.as_bytes());
        let config_sha256 = hex_string(&hasher.finalize());
        Ok(RunDir {
            root: root.to_path_buf(),
            command: command.to_string(),
            config_sha256,
            threads: config.threads,
            artifacts: vec!["config.json".to_string()],
            started: Instant::now(),
        })
    }

    /// Serialize `value` as pretty JSON under `name`.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = to_pretty_json(value)?;
        fs::write(self.root.join(name), text)?;
        self.artifacts.push(name.to_string());
        log_event("artifact", &json!({ "file": name }));
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        fs::write(self.root.join(name), text)?;
        self.artifacts.push(name.to_string());
        log_event("artifact", &json!({ "file": name }));
        Ok(())
    }

    /// Write `manifest.json` and return the artifact list.
    pub fn finish(mut self) -> Result<Vec<String>> {
        self.artifacts.sort();
        let manifest = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config_sha256": self.config_sha256,
            "threads": self.threads,
            "wall_time_ms": self.started.elapsed().as_millis() as u64,
            "artifacts": self.artifacts,
        });
        fs::write(
            self.root.join("manifest.json"),
            format!("{:#}\n", manifest),
        )?;
        Ok(self.artifacts)
    }
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// One structured JSON line per event, on stderr.
pub fn log_event(event: &str, fields: &serde_json::Value) {
    let mut record = json!({ "event": event });
    if let (Some(obj), Some(extra)) = (record.as_object_mut(), fields.as_object()) {
        for (k, v) in extra {
            obj.insert(k.clone(), v.clone());
        }
    }
    eprintln!("{record}");
}
