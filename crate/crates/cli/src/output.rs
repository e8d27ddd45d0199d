//! Result files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use holosense::holography::format_sig12;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// CSV text with LF line endings.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut c = Self { text: String::new() };
        c.row(header.iter().map(|h| h.to_string()));
        c
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) {
        let line: Vec<String> = fields.into_iter().collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// A real value with 12 significant digits; `inf` for a missing SNR.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format_sig12(x)
    }
}

pub fn snr(s: Option<f64>) -> String {
    s.map_or_else(|| "inf".into(), num)
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Writes `<prefix>_<suffix>` files under one directory and records them.
pub struct Artifacts {
    dir: PathBuf,
    prefix: String,
    pub files: Vec<FileEntry>,
}

impl Artifacts {
    pub fn new(dir: &Path, prefix: &str) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            prefix: prefix.to_string(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}_{suffix}", self.prefix))
    }

    pub fn write(&mut self, suffix: &str, bytes: &[u8]) -> std::io::Result<()> {
        let path = self.path(suffix);
        fs::write(&path, bytes)?;
        log::info!("wrote {}", path.display());
        self.files.push(FileEntry {
            path: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_csv(&mut self, suffix: &str, csv: Csv) -> std::io::Result<()> {
        self.write(suffix, &csv.into_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `git describe`-style version: a tag-based description when the build
/// tree has one, otherwise the crate version plus the abbreviated commit.
pub fn version_string() -> String {
    let base = format!("v{}", env!("CARGO_PKG_VERSION"));
    match option_env!("HOLOSENSE_GIT_DESCRIBE") {
        Some(d) if d.starts_with('v') => d.to_string(),
        Some(d) if !d.is_empty() => format!("{base}-g{d}"),
        _ => base,
    }
}
