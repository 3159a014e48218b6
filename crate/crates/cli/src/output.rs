use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes artifacts that all begin with the same provenance header.
#[derive(Debug, Clone)]
pub struct Artifacts {
    dir: PathBuf,
    header: String,
}

impl Artifacts {
    /// `resolved` is the full effective configuration of the run.
    pub fn new(dir: &Path, command: &str, resolved: &impl Serialize) -> anyhow::Result<Self> {
        let hash = config_hash(command, resolved)?;
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            header: format!("# catkit {VERSION} {command} config-sha256={hash}\n"),
        })
    }

    pub fn header(&self) -> &str {
        &self.header
    }

    /// `explicit` if given, else `name` inside the output directory.
    pub fn path(&self, explicit: Option<&Path>, name: &str) -> PathBuf {
        explicit.map_or_else(|| self.dir.join(name), Path::to_path_buf)
    }

    pub fn write(&self, path: &Path, body: &str) -> anyhow::Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        let mut text = String::with_capacity(self.header.len() + body.len());
        text.push_str(&self.header);
        text.push_str(body);
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }
}

pub fn config_hash(command: &str, resolved: &impl Serialize) -> anyhow::Result<String> {
    let json = serde_json::to_string(&(command, resolved))?;
    Ok(hex::encode(Sha256::digest(json.as_bytes())))
}
