//! Output directories whose files all carry the run's config hash, plus the
//! run manifest that lists them.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Short hash of the resolved settings and the contents of every input file.
pub fn config_hash(settings: &serde_json::Value, inputs: &[&Path]) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(settings)?);
    for p in inputs {
        let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
        h.update(Sha256::digest(&bytes));
    }
    Ok(hex::encode(h.finalize())[..16].to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub seed: Option<u64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub settings: serde_json::Value,
    pub stages: Vec<StageRecord>,
    pub files: Vec<String>,
}

/// How a file marks the config hash on its first line.
#[derive(Debug, Clone, Copy)]
enum Marker {
    Hash,
    Xml,
}

pub struct OutputDir {
    root: PathBuf,
    hash: String,
    command: String,
    settings: serde_json::Value,
    files: Vec<String>,
    stages: Vec<StageRecord>,
}

impl OutputDir {
    pub fn create(root: &Path, command: &str, settings: serde_json::Value, hash: String) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            hash,
            command: command.to_string(),
            settings,
            files: Vec::new(),
            stages: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn write(&mut self, name: &str, marker: Marker, body: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut f = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        match marker {
            Marker::Hash => writeln!(f, "# config {}", self.hash)?,
            Marker::Xml => writeln!(f, "<!-- config {} -->", self.hash)?,
        }
        f.write_all(body)?;
        self.files.push(name.to_string());
        Ok(path)
    }

    /// Writes a `#`-commented text file (CSV, mask, summary).
    pub fn text(&mut self, name: &str, body: impl AsRef<[u8]>) -> Result<PathBuf> {
        self.write(name, Marker::Hash, body.as_ref())
    }

    /// Writes via a closure that fills a buffer.
    pub fn text_with(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<PathBuf> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.text(name, buf)
    }

    pub fn svg(&mut self, name: &str, body: &str) -> Result<PathBuf> {
        self.write(name, Marker::Xml, body.as_bytes())
    }

    /// JSON object with the hash as its first key.
    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf> {
        let doc = serde_json::json!({ "config_hash": self.hash, "content": value });
        let body = serde_json::to_string_pretty(&doc)? + "\n";
        let path = self.path(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(path)
    }

    /// Registers a file written by other code; it must already carry the hash.
    pub fn adopt(&mut self, name: &str) {
        self.files.push(name.to_string());
    }

    /// Runs a stage and records its wall time.
    pub fn stage<R>(&mut self, name: &str, seed: Option<u64>, f: impl FnOnce(&mut Self) -> Result<R>) -> Result<R> {
        let start = Instant::now();
        let r = f(self)?;
        self.stages.push(StageRecord {
            name: name.to_string(),
            seed,
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(r)
    }

    pub fn finish(mut self) -> Result<RunManifest> {
        self.files.sort();
        self.files.dedup();
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            config_hash: self.hash,
            settings: self.settings,
            stages: self.stages,
            files: self.files,
        };
        let body = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(self.root.join(MANIFEST_NAME), body)?;
        Ok(manifest)
    }
}

/// Checks that every listed file exists and names the hash on its first lines.
pub fn verify_manifest(root: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(root.join(MANIFEST_NAME))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let hash = v["config_hash"].as_str().context("manifest lacks config_hash")?.to_string();
    let files: Vec<String> = serde_json::from_value(v["files"].clone())?;
    for f in &files {
        let body = fs::read_to_string(root.join(f)).with_context(|| format!("listed file {f} is unreadable"))?;
        let head: String = body.lines().take(5).collect::<Vec<_>>().join("\n");
        anyhow::ensure!(head.contains(&hash), "{f} does not carry config hash {hash}");
    }
    Ok(RunManifest {
        tool: v["tool"].as_str().unwrap_or_default().to_string(),
        version: v["version"].as_str().unwrap_or_default().to_string(),
        command: v["command"].as_str().unwrap_or_default().to_string(),
        config_hash: hash,
        settings: v["settings"].clone(),
        stages: Vec::new(),
        files,
    })
}
