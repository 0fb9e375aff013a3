//! Run-directory bookkeeping: resolved config echo and file inventory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

pub const RESOLVED_CONFIG: &str = "config.resolved.txt";
pub const RUN_MANIFEST: &str = "run_manifest.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One inventory entry: a name relative to its root, byte size and digest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileEntry {
    pub name: String,
    pub size: u64,
    pub sha256: String,
}

impl FileEntry {
    pub fn read(root: &Path, path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let name = path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/");
        Ok(Self { name, size: bytes.len() as u64, sha256: sha256_hex(&bytes) })
    }
}

/// Every regular file under `dir`, sorted by relative name.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).with_context(|| format!("listing {}", d.display()))? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Accumulates what a command read and wrote.
#[derive(Debug)]
pub struct RunRecord {
    command: String,
    run_dir: PathBuf,
    config_text: String,
    deterministic: bool,
    inputs: Vec<(String, FileEntry)>,
    started: Instant,
}

impl RunRecord {
    pub fn start(command: &str, run_dir: &Path, config_text: String, deterministic: bool) -> Result<Self> {
        fs::create_dir_all(run_dir).with_context(|| format!("creating {}", run_dir.display()))?;
        Ok(Self {
            command: command.to_string(),
            run_dir: run_dir.to_path_buf(),
            config_text,
            deterministic,
            inputs: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn add_input(&mut self, role: &str, root: &Path, path: &Path) -> Result<()> {
        self.inputs.push((role.to_string(), FileEntry::read(root, path)?));
        Ok(())
    }

    /// Records every file under `dir` except run manifests, whose contents
    /// vary between otherwise identical runs.
    pub fn add_input_dir(&mut self, role: &str, dir: &Path) -> Result<()> {
        for path in list_files(dir)? {
            if path.file_name().is_some_and(|n| n == RUN_MANIFEST) {
                continue;
            }
            self.add_input(role, dir, &path)?;
        }
        Ok(())
    }

    /// Writes the config echo and the manifest; every other output must
    /// already be on disk.
    pub fn finish(self) -> Result<()> {
        let cfg_path = self.run_dir.join(RESOLVED_CONFIG);
        fs::write(&cfg_path, &self.config_text).with_context(|| format!("writing {}", cfg_path.display()))?;
        let mut outputs = Vec::new();
        for path in list_files(&self.run_dir)? {
            if path.file_name().is_some_and(|n| n == RUN_MANIFEST) {
                continue;
            }
            outputs.push(FileEntry::read(&self.run_dir, &path)?);
        }
        let mut m = String::new();
        m.push_str(&format!("command={}\n", self.command));
        m.push_str(&format!("run_dir={}\n", self.run_dir.display()));
        m.push_str(&format!("config_sha256={}\n", sha256_hex(self.config_text.as_bytes())));
        m.push_str(&format!("deterministic={}\n", self.deterministic));
        for (role, f) in &self.inputs {
            m.push_str(&format!("input={role}/{} {} {}\n", f.name, f.size, f.sha256));
        }
        for f in &outputs {
            m.push_str(&format!("output={} {} {}\n", f.name, f.size, f.sha256));
        }
        m.push_str(&format!("duration_ms={}\n", self.started.elapsed().as_millis()));
        let path = self.run_dir.join(RUN_MANIFEST);
        fs::write(&path, m).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
