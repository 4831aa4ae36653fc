//! Result persistence: byte-stable CSV/JSON emission and the run manifest.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! identical results produce identical bytes. The manifest is written last
//! and lists every emitted file with its SHA-256. `SOURCE_DATE_EPOCH`
//! overrides the wall-clock timestamp for fully reproducible manifests.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize)]
struct ManifestFile {
    path: String,
    bytes: usize,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    artifact_version: &'a str,
    command: &'a str,
    config_sha256: &'a str,
    seed: u64,
    created_unix: u64,
    files: Vec<ManifestFile>,
}

pub struct RunWriter {
    out_dir: PathBuf,
    command: String,
    config_sha256: String,
    seed: u64,
    files: Vec<ManifestFile>,
}

impl RunWriter {
    pub fn new(
        out_dir: &Path,
        command: &str,
        config_bytes: &[u8],
        seed: u64,
    ) -> std::io::Result<Self> {
        fs::create_dir_all(out_dir)?;
        Ok(RunWriter {
            out_dir: out_dir.to_path_buf(),
            command: command.to_string(),
            config_sha256: hex::encode(Sha256::digest(config_bytes)),
            seed,
            files: Vec::new(),
        })
    }

    fn record(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        let path = self.out_dir.join(name);
        let mut f = fs::File::create(&path)?;
        f.write_all(bytes)?;
        self.files.push(ManifestFile {
            path: name.to_string(),
            bytes: bytes.len(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable result");
        bytes.push(b'\n');
        self.record(name, &bytes)
    }

    /// CSV with shortest round-trip float formatting.
    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl Iterator<Item = Vec<f64>>,
    ) -> std::io::Result<()> {
        let mut buf = String::new();
        buf.push_str(&header.join(","));
        buf.push('\n');
        for row in rows {
            let mut first = true;
            for v in row {
                if !first {
                    buf.push(',');
                }
                first = false;
                buf.push_str(&format!("{v}"));
            }
            buf.push('\n');
        }
        self.record(name, buf.as_bytes())
    }

    /// Writes the manifest (always the last file of a run).
    pub fn finish(mut self) -> std::io::Result<()> {
        let created_unix = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.parse::<u64>().ok())
            .unwrap_or_else(|| {
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            });
        let manifest = RunManifest {
            artifact_version: ARTIFACT_VERSION,
            command: &self.command,
            config_sha256: &self.config_sha256,
            seed: self.seed,
            created_unix,
            files: std::mem::take(&mut self.files),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        bytes.push(b'\n');
        let path = self.out_dir.join("run_manifest.json");
        let mut f = fs::File::create(path)?;
        f.write_all(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_run_manifest_has_empty_file_list() {
        let dir = std::env::temp_dir().join(format!("slvq_manifest_{}", std::process::id()));
        let w = RunWriter::new(&dir, "noop", b"{}", 0).unwrap();
        w.finish().unwrap();
        let doc: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.join("run_manifest.json")).unwrap()).unwrap();
        assert_eq!(doc["files"].as_array().unwrap().len(), 0);
        fs::remove_dir_all(dir).unwrap();
    }
}
