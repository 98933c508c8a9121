use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const MANIFEST_SCHEMA: &str = "qportfolio.manifest/1";

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub command: String,
    pub parameters: serde_json::Value,
    /// The base seed followed by every derived per-instance seed.
    pub seeds: Vec<u64>,
    pub artifact_version: String,
    pub outputs: Vec<PathBuf>,
    pub output_schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<serde_json::Value>,
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &crate::Command, output_schema: &str) -> Result<Self> {
        let tagged = serde_json::to_value(command)?;
        Ok(Self {
            schema: MANIFEST_SCHEMA.to_string(),
            command: tagged["command"].as_str().unwrap_or_default().to_string(),
            parameters: tagged["parameters"].clone(),
            seeds: Vec::new(),
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: Vec::new(),
            output_schema: output_schema.to_string(),
            summary: None,
            duration_seconds: 0.0,
        })
    }

    pub fn command(&self) -> Result<crate::Command> {
        let tagged = serde_json::json!({ "command": self.command, "parameters": self.parameters });
        serde_json::from_value(tagged)
            .with_context(|| format!("manifest records unknown command {:?}", self.command))
    }

    pub fn finish(mut self, path: &Path, elapsed: Duration) -> Result<()> {
        self.duration_seconds = elapsed.as_secs_f64();
        write_json(path, &self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let manifest: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))?;
        anyhow::ensure!(
            manifest.schema == MANIFEST_SCHEMA,
            "unsupported manifest schema {:?}",
            manifest.schema
        );
        Ok(manifest)
    }
}

/// `out.csv` gets `out.csv.manifest.json`; a directory gets `manifest.json`.
pub fn manifest_path(out: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        return out.join("manifest.json");
    }
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot write to {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}
