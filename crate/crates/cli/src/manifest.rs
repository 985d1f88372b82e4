//! Output directory handling and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    command: &'a str,
    workers: usize,
    config: &'a C,
    outputs: Vec<String>,
}

/// Files produced by one command, written together with `manifest.json`.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Outputs { dir: dir.to_path_buf(), files: Vec::new() }
    }

    pub fn add(&mut self, name: &str, content: String) {
        self.files.push((name.to_string(), content));
    }

    /// Write all files and the manifest; the manifest has no timestamps so
    /// repeated runs are byte-identical.
    pub fn write<C: Serialize>(self, command: &str, workers: usize, config: &C) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        let mut written = Vec::new();
        for (name, content) in &self.files {
            let path = self.dir.join(name);
            fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        let manifest = Manifest {
            tool: "nbfec",
            version: env!("CARGO_PKG_VERSION"),
            core_version: nbfec::VERSION,
            command,
            workers,
            config,
            outputs: self.files.iter().map(|f| f.0.clone()).collect(),
        };
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
        Ok(written)
    }
}
