//! Run manifests: what was run, with which resolved configuration, and what
//! it wrote.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};

use crate::CliError;

pub struct Manifest {
    subcommand: &'static str,
    config: Map<String, Value>,
    outputs: Vec<String>,
    extra: Map<String, Value>,
    dir: PathBuf,
}

impl Manifest {
    pub fn new(subcommand: &'static str, dir: &Path) -> Self {
        Manifest {
            subcommand,
            config: Map::new(),
            outputs: Vec::new(),
            extra: Map::new(),
            dir: dir.to_path_buf(),
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}-manifest.json", self.subcommand)
    }

    pub fn config(&mut self, key: &str, value: impl Into<Value>) {
        self.config.insert(key.to_string(), value.into());
    }

    /// Summary results recorded next to the configuration.
    pub fn result(&mut self, key: &str, value: impl Into<Value>) {
        self.extra.insert(key.to_string(), value.into());
    }

    /// Writes `contents` into the output directory and records it.
    pub fn emit(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf, CliError> {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let doc = json!({
            "subcommand": self.subcommand,
            "version": env!("CARGO_PKG_VERSION"),
            "timestamp_unix": timestamp,
            "config": self.config,
            "results": self.extra,
            "outputs": self.outputs,
        });
        let path = self.dir.join(self.file_name());
        let text = serde_json::to_string_pretty(&doc).expect("manifest serializes");
        std::fs::write(&path, text + "\n")
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}
