use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Provenance record written next to every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Fully resolved flags and configuration.
    pub config: serde_json::Value,
    /// SHA-256 of each input file, keyed by its role.
    pub inputs: BTreeMap<String, InputDigest>,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config: &impl Serialize) -> Result<Self, CliError> {
        Ok(RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: serde_json::to_value(config).map_err(rca_core::RcaError::from)?,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<(), CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.insert(
            role.to_string(),
            InputDigest { path: path.to_path_buf(), sha256: hex::encode(Sha256::digest(&bytes)) },
        );
        Ok(())
    }

    /// Writes the manifest to `<primary>.manifest.json`.
    pub fn write_beside(&self, primary: &Path) -> Result<PathBuf, CliError> {
        let path = sidecar_path(primary);
        write_json(&path, self)?;
        Ok(path)
    }
}

pub fn sidecar_path(primary: &Path) -> PathBuf {
    let mut name = primary.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(rca_core::RcaError::from)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
