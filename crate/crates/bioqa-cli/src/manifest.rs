//! Run manifests: every subcommand records its effective configuration and
//! the SHA-256 of every input and output file, so identical manifests imply
//! byte-identical artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct FileStamp {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    /// Effective configuration after flag/default resolution.
    pub config: serde_json::Value,
    pub config_sha256: String,
    pub inputs: BTreeMap<String, FileStamp>,
    pub outputs: BTreeMap<String, FileStamp>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(subcommand: &str, config: serde_json::Value) -> Self {
        let canonical = serde_json::to_vec(&config).expect("config serializes");
        Manifest {
            tool: "bioqa",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            config_sha256: sha256_hex(&canonical),
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn stamp_input(&mut self, role: &str, path: &Path) -> io::Result<()> {
        let bytes = fs::read(path)?;
        self.inputs.insert(
            role.to_string(),
            FileStamp {
                path: path.display().to_string(),
                sha256: sha256_hex(&bytes),
            },
        );
        Ok(())
    }

    pub fn stamp_output(&mut self, role: &str, path: &Path) -> io::Result<()> {
        let bytes = fs::read(path)?;
        self.outputs.insert(
            role.to_string(),
            FileStamp {
                path: path.display().to_string(),
                sha256: sha256_hex(&bytes),
            },
        );
        Ok(())
    }

    /// Writes the manifest next to the primary output (or to an explicit
    /// path for directory outputs).
    pub fn write(&self, path: &Path) -> io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("manifest serializes");
        bytes.push(b'\n');
        fs::write(path, bytes)
    }
}

/// `<output>.manifest.json` beside the primary output file.
pub fn manifest_path_for(output: &Path) -> std::path::PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}
