use std::fs;
use std::path::{Path, PathBuf};

use reachkit::Error;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileHash {
    pub fn of(path: &Path) -> Result<Self, Error> {
        let bytes = fs::read(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Ok(Self {
            path: path.to_owned(),
            sha256: sha256_hex(&bytes),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Record of one invocation, sufficient to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Command-line arguments after the program name.
    pub args: Vec<String>,
    /// Working directory the arguments are relative to.
    pub cwd: PathBuf,
    pub rng_seed: u64,
    pub params: serde_json::Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub warnings: Vec<String>,
    pub duration_seconds: f64,
}

/// Manifest location for an output file: `map.json` -> `map.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

pub fn write_manifest(m: &RunManifest, path: &Path) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(m).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, Error> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_sits_beside_its_output() {
        assert_eq!(manifest_path(Path::new("out/map.json")), Path::new("out/map.manifest.json"));
        assert_eq!(manifest_path(Path::new("report")), Path::new("report.manifest.json"));
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.manifest.json");
        let m = RunManifest {
            tool: "reachkit-cli".into(),
            version: "0.1.0".into(),
            command: "inspect".into(),
            args: vec!["inspect".into(), "map.json".into()],
            cwd: dir.path().to_owned(),
            rng_seed: 9,
            params: serde_json::json!({"json": true}),
            inputs: vec![],
            outputs: vec![],
            warnings: vec!["w".into()],
            duration_seconds: 0.5,
        };
        write_manifest(&m, &path).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), m);
    }
}
