use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Record of one invocation. The timestamp is the only field that changes
/// between identical reruns; it never appears in any other output.
#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config: &'a C,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
    pub exit_code: u8,
    pub unix_time: u64,
}

impl<'a, C: Serialize> Manifest<'a, C> {
    pub fn new(subcommand: &'static str, config: &'a C) -> Self {
        Self {
            tool: "epee",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            exit_code: 0,
            unix_time: 0,
        }
    }

    /// Written as `<subcommand>.manifest.json` in `dir`.
    pub fn write(mut self, dir: &Path) -> anyhow::Result<PathBuf> {
        self.unix_time = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(format!("{}.manifest.json", self.subcommand));
        fs::write(&path, serde_json::to_string_pretty(&self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn digest(path: &Path) -> anyhow::Result<InputDigest> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(InputDigest {
        path: path.to_path_buf(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}
