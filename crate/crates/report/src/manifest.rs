//! Run manifests, digests and atomic artifact writes.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Artifact paths are relative to the output directory; input paths are
    /// as resolved when the command ran.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(path: impl Into<String>, data: &[u8]) -> Self {
        FileDigest {
            path: path.into(),
            sha256: sha256_hex(data),
            bytes: data.len() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<FileDigest>,
    pub wall_clock_s: f64,
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Writes `data` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, data: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(data)?;
        f.sync_all()
    })();
    match result.and_then(|()| fs::rename(&tmp, path)) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

/// Artifacts written by one command. Dropping it without `commit` removes
/// every file it wrote.
#[derive(Debug)]
pub struct ArtifactSet {
    root: PathBuf,
    written: Vec<FileDigest>,
    committed: bool,
}

impl ArtifactSet {
    pub fn new(root: &Path) -> Self {
        ArtifactSet {
            root: root.to_path_buf(),
            written: Vec::new(),
            committed: false,
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, data: &[u8]) -> io::Result<()> {
        let path = self.root.join(rel);
        write_atomic(&path, data)?;
        self.written.retain(|d| d.path != rel);
        self.written.push(FileDigest::of(rel, data));
        Ok(())
    }

    pub fn digests(&self) -> &[FileDigest] {
        &self.written
    }

    pub fn commit(mut self) -> Vec<FileDigest> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for ArtifactSet {
    fn drop(&mut self) {
        if !self.committed {
            for d in &self.written {
                let _ = fs::remove_file(self.root.join(&d.path));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mismatch {
    Missing(String),
    Digest(String),
}

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mismatch::Missing(p) => write!(f, "missing: {p}"),
            Mismatch::Digest(p) => write!(f, "digest mismatch: {p}"),
        }
    }
}

fn check(base: &Path, d: &FileDigest, out: &mut Vec<Mismatch>) {
    let path = base.join(&d.path);
    match fs::read(&path) {
        Ok(data) if data.len() as u64 == d.bytes && sha256_hex(&data) == d.sha256 => {}
        Ok(_) => out.push(Mismatch::Digest(d.path.clone())),
        Err(_) => out.push(Mismatch::Missing(d.path.clone())),
    }
}

/// Re-hashes every input and artifact listed in `dir/manifest.json`.
/// Relative paths resolve against `dir`.
pub fn verify_dir(dir: &Path) -> io::Result<(RunManifest, Vec<Mismatch>)> {
    let text = fs::read_to_string(dir.join(MANIFEST_NAME))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    let mut bad = Vec::new();
    for d in manifest.inputs.iter().chain(&manifest.artifacts) {
        check(dir, d, &mut bad);
    }
    Ok((manifest, bad))
}
