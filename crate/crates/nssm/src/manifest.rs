//! Run manifests: config, seed, versions and file checksums.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub nssm: String,
    pub nssm_core: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub threads: usize,
    pub versions: Versions,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Kept apart so the remaining fields are reproducible.
    pub created_unix: u64,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let k = f.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if k == 0 {
            break;
        }
        h.update(&buf[..k]);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn digest(path: &Path) -> CliResult<FileDigest> {
    Ok(FileDigest { path: path.display().to_string(), sha256: sha256_file(path)? })
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64, threads: usize) -> Self {
        Self {
            command: command.to_owned(),
            config,
            seed,
            threads,
            versions: Versions { nssm: env!("CARGO_PKG_VERSION").to_owned(), nssm_core: nssm_core_version() },
            inputs: Vec::new(),
            outputs: Vec::new(),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> CliResult<()> {
        self.inputs.push(digest(path)?);
        Ok(())
    }

    /// Records outputs by file name relative to the output directory.
    pub fn add_outputs(&mut self, dir: &Path, names: &[PathBuf]) -> CliResult<()> {
        for name in names {
            let d = digest(&dir.join(name))?;
            self.outputs.push(FileDigest { path: name.display().to_string(), sha256: d.sha256 });
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::input(path, e.to_string()))
    }
}

fn nssm_core_version() -> String {
    // Both crates share the workspace version.
    env!("CARGO_PKG_VERSION").to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_text() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc.txt");
        std::fs::write(&p, "abc").unwrap();
        assert_eq!(sha256_file(&p).unwrap(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("out.csv"), "a\n1\n").unwrap();
        let mut m = Manifest::new("fit", serde_json::json!({"seed": 3}), 3, 1);
        m.add_outputs(dir.path(), &[PathBuf::from("out.csv")]).unwrap();
        let p = m.write(dir.path()).unwrap();
        assert_eq!(Manifest::read(&p).unwrap(), m);
    }
}
