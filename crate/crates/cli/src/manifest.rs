//! Run manifests: the resolved configuration plus a git-style blob hash
//! (`sha256("blob <len>\0" ‖ content)`) of every input file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Default)]
pub struct Manifest {
    lines: Vec<String>,
    inputs: Vec<(String, PathBuf)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            lines: vec![format!("command={command}")],
            inputs: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        self.lines.push(format!("{key}={value}"));
        self
    }

    /// Appends pre-rendered `key=value` lines.
    pub fn extend(&mut self, text: &str) -> &mut Self {
        self.lines.extend(text.lines().map(str::to_owned));
        self
    }

    pub fn input(&mut self, label: &str, path: &Path) -> &mut Self {
        self.inputs.push((label.to_owned(), path.to_path_buf()));
        self
    }

    pub fn render(&self) -> Result<String> {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        for (label, path) in &self.inputs {
            let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
            let _ = writeln!(out, "input.{label}={}\t{}", path.display(), blob_hash(&bytes));
        }
        Ok(out)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.txt");
        std::fs::write(&path, self.render()?).with_context(|| format!("writing {}", path.display()))
    }
}
