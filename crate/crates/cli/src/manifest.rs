//! Run manifests: the last file a command writes.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use spinn_core::fdm::sha256_hex;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "spinn-manifest-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub command: String,
    pub arguments: Vec<String>,
    pub config_file: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub artifacts: Vec<Artifact>,
}

impl RunManifest {
    pub fn new(command: &str, arguments: &[String], config_file: Option<PathBuf>, output_dir: &Path) -> Self {
        Self {
            format: MANIFEST_FORMAT.into(),
            command: command.into(),
            arguments: arguments.to_vec(),
            config_file,
            output_dir: output_dir.to_path_buf(),
            artifacts: Vec::new(),
        }
    }

    /// Records `name` inside the output directory with its checksum.
    pub fn add(&mut self, name: &str) -> Result<()> {
        let bytes = std::fs::read(self.output_dir.join(name)).with_context(|| format!("reading {name}"))?;
        self.artifacts.push(Artifact { path: name.into(), bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) });
        Ok(())
    }

    /// Writes atomically through a temporary file.
    pub fn write(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(self)? + "\n")?;
        std::fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Checks that every artifact still matches its checksum.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for a in &self.artifacts {
            let bytes = std::fs::read(dir.join(&a.path)).with_context(|| format!("reading {}", dir.join(&a.path).display()))?;
            if sha256_hex(&bytes) != a.sha256 {
                bail!("{} changed since the run finished", dir.join(&a.path).display());
            }
        }
        Ok(())
    }
}
