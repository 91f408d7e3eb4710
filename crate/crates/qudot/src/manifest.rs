//! Run manifests.

use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::output::hex;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    pub started_unix_s: f64,
    pub elapsed_s: f64,
}

/// Written last into every output directory. `files` lists every other
/// file in the directory; the manifest itself is the only addition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// SHA-256 of the scenario file bytes.
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub files: Vec<FileEntry>,
    pub wall_clock: WallClock,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: &[u8], seed: u64, threads: usize, files: Vec<FileEntry>, started: SystemTime) -> Self {
        let since = started.duration_since(UNIX_EPOCH).unwrap_or(Duration::ZERO);
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            config_sha256: hex(&Sha256::digest(config)),
            seed,
            threads,
            files,
            wall_clock: WallClock {
                started_unix_s: since.as_secs_f64(),
                elapsed_s: started.elapsed().unwrap_or(Duration::ZERO).as_secs_f64(),
            },
        }
    }

    /// Names of all files a run owns, manifest included.
    pub fn all_names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.files.iter().map(|f| f.name.clone()).collect();
        v.push(MANIFEST_NAME.into());
        v
    }
}
