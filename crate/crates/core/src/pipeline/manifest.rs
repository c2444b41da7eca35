use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// File name only, so manifests do not depend on where a run lives.
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of_bytes(name: &str, data: &[u8]) -> Self {
        Self {
            name: name.to_owned(),
            sha256: sha256_hex(data),
            bytes: data.len() as u64,
        }
    }

    pub fn of_file(path: &Path) -> Result<Self> {
        let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::of_bytes(&file_name(path), &data))
    }
}

pub(crate) fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Record of one stage run: what it was configured with, what it read and
/// what it wrote.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub config_hash: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

impl Manifest {
    pub fn path(output_dir: &Path, stage: &str) -> PathBuf {
        output_dir.join("manifests").join(format!("{stage}.json"))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("manifest serialises");
        out.push(b'\n');
        out
    }

    pub fn read(path: &Path) -> Result<Option<Self>> {
        match std::fs::read(path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| Error::Ingest(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    /// True when the recorded outputs are still on disk unchanged.
    pub fn outputs_intact(&self, output_dir: &Path) -> bool {
        self.outputs.iter().all(|o| {
            FileDigest::of_file(&output_dir.join(&o.name)).is_ok_and(|d| d == *o)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn intact_detects_edits() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), b"one").unwrap();
        let m = Manifest {
            stage: "s".into(),
            config_hash: "h".into(),
            inputs: vec![],
            outputs: vec![FileDigest::of_bytes("a.txt", b"one")],
        };
        assert!(m.outputs_intact(dir.path()));
        std::fs::write(dir.path().join("a.txt"), b"two").unwrap();
        assert!(!m.outputs_intact(dir.path()));
        let path = Manifest::path(dir.path(), "s");
        assert_eq!(Manifest::read(&path).unwrap(), None);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, m.to_bytes()).unwrap();
        assert_eq!(Manifest::read(&path).unwrap(), Some(m));
    }
}
