//! Artifact directory with a checksummed manifest.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct FileEntry {
    pub name: String,
    pub size: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct AbortInfo {
    pub t: f64,
    pub last_good_t: f64,
    pub reason: String,
}

pub struct OutputDir {
    dir: PathBuf,
    names: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> std::io::Result<OutputDir> {
        fs::create_dir_all(dir)?;
        Ok(OutputDir { dir: dir.to_path_buf(), names: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    /// Writes `name` through `fill` and records it for the manifest.
    pub fn write(
        &mut self,
        name: &str,
        fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
    ) -> std::io::Result<()> {
        let mut w = BufWriter::new(fs::File::create(self.dir.join(name))?);
        fill(&mut w)?;
        w.flush()?;
        if !self.names.iter().any(|n| n == name) {
            self.names.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> std::io::Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }

    pub fn entries(&self) -> std::io::Result<Vec<FileEntry>> {
        self.names
            .iter()
            .map(|name| {
                let bytes = fs::read(self.dir.join(name))?;
                Ok(FileEntry {
                    name: name.clone(),
                    size: bytes.len() as u64,
                    sha256: format!("{:x}", Sha256::digest(&bytes)),
                })
            })
            .collect()
    }

    /// `manifest.json`: config echo, versions, every emitted file, abort flag.
    pub fn finish(
        mut self,
        config: &serde_json::Value,
        abort: Option<&AbortInfo>,
        error: Option<&str>,
    ) -> std::io::Result<PathBuf> {
        let manifest = serde_json::json!({
            "tool": "wavelab",
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "files": self.entries()?,
            "aborted": abort.is_some() || error.is_some(),
            "last_good_t": abort.map(|a| a.last_good_t),
            "abort": abort,
            "error": error,
        });
        self.write_json("manifest.json", &manifest)?;
        Ok(self.dir.join("manifest.json"))
    }
}
