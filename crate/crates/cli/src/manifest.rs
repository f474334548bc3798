//! Content manifests for output directories.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const LOCK: &str = ".tamq.lock";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    pub name: String,
    pub role: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub files: Vec<FileEntry>,
}

pub fn hash_file(path: &Path) -> Result<(u64, String)> {
    let mut f = BufReader::new(File::open(path).map_err(|e| CliError::io(path, e))?);
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    let mut n = 0u64;
    loop {
        let k = f.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if k == 0 {
            break;
        }
        n += k as u64;
        h.update(&buf[..k]);
    }
    Ok((n, hex::encode(h.finalize())))
}

impl Manifest {
    pub fn new(config_hash: String) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
            files: Vec::new(),
        }
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let f = File::open(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::from_reader(BufReader::new(f))
            .map_err(|e| CliError::Verify(format!("{}: {e}", path.display())))
    }

    /// Existing manifest of `dir` if present, otherwise an empty one.
    pub fn open_or_new(dir: &Path, config_hash: String) -> Result<Self> {
        if dir.join(MANIFEST).exists() {
            let mut m = Self::read(dir)?;
            m.config_hash = config_hash;
            Ok(m)
        } else {
            Ok(Self::new(config_hash))
        }
    }

    /// Hashes `name` (relative to `dir`) and adds or replaces its entry.
    pub fn record(&mut self, dir: &Path, name: &str, role: &str) -> Result<()> {
        let (bytes, sha256) = hash_file(&dir.join(name))?;
        let entry = FileEntry {
            name: name.to_string(),
            role: role.to_string(),
            bytes,
            sha256,
        };
        match self.files.iter_mut().find(|f| f.name == name) {
            Some(f) => *f = entry,
            None => self.files.push(entry),
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    /// Re-hashes every listed file; returns the list of problems.
    pub fn check(&self, dir: &Path) -> Vec<String> {
        let mut problems = Vec::new();
        for f in &self.files {
            match hash_file(&dir.join(&f.name)) {
                Ok((bytes, sha)) if bytes == f.bytes && sha == f.sha256 => {}
                Ok(_) => problems.push(format!(
                    "{} ({}) does not match its recorded hash",
                    f.name, f.role
                )),
                Err(e) => problems.push(e.to_string()),
            }
        }
        problems
    }
}

/// Exclusive lock on an output directory, released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(CliError::Locked(dir.to_path_buf()))
            }
            Err(e) => Err(CliError::io(&path, e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
