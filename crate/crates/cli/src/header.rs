//! Run metadata written at the top of every output.

use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything that determines a run's output. The output path is left out
/// so the same run written to two places is byte-identical.
pub struct RunHeader {
    command: &'static str,
    seed: u64,
    config: Map<String, Value>,
}

impl RunHeader {
    pub fn new(command: &'static str, seed: u64) -> Self {
        RunHeader {
            command,
            seed,
            config: Map::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.config.insert(key.to_string(), value.into());
        self
    }

    /// Records an input by path and content digest.
    pub fn input(&mut self, key: &str, path: &Path) -> Result<&mut Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let entry = json!({ "path": path.display().to_string(), "sha256": hex::encode(Sha256::digest(&bytes)) });
        match self.config.get_mut("inputs") {
            Some(Value::Object(inputs)) => {
                inputs.insert(key.to_string(), entry);
            }
            _ => {
                self.config.insert("inputs".into(), json!({ key: entry }));
            }
        }
        Ok(self)
    }

    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(&self.config).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "tool": "summetrics",
            "version": VERSION,
            "command": self.command,
            "seed": self.seed,
            "config_sha256": self.config_hash(),
            "config": self.config,
        })
    }

    /// `#` comment block for TSV outputs.
    pub fn write_comment<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# summetrics {VERSION} {}", self.command)?;
        writeln!(w, "# config-sha256: {}", self.config_hash())?;
        writeln!(w, "# seed: {}", self.seed)?;
        writeln!(w, "# run: {}", self.to_json())
    }
}
