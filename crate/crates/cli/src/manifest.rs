//! Run manifests: the resolved command line plus provenance of one run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub subcommand: String,
    /// Command line that reproduces the run (config file already merged in).
    pub args: Vec<String>,
    /// Every effective setting, defaults included.
    pub config: BTreeMap<String, String>,
    pub engine: Option<String>,
    pub seed: Option<u64>,
    pub outputs: Vec<PathBuf>,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(args: &[String], config: &BTreeMap<String, String>, outputs: Vec<PathBuf>) -> Self {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            tool: "merw".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            subcommand: args.first().cloned().unwrap_or_default(),
            args: args.to_vec(),
            config: config.clone(),
            engine: config.get("engine").cloned(),
            seed: config.get("seed").and_then(|s| s.parse().ok()),
            outputs,
            timestamp: humantime::format_rfc3339_seconds(SystemTime::now()).to_string(),
        }
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: not a run manifest: {e}", path.display())))?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(CliError::Usage(format!(
                "{}: manifest schema {} is not supported (expected {SCHEMA_VERSION})",
                path.display(),
                m.schema_version
            )));
        }
        Ok(m)
    }
}

/// Where the manifest of a run goes: `--manifest`, else next to `--out`.
pub fn manifest_path(explicit: Option<&Path>, out: Option<&Path>, out_is_dir: bool) -> Option<PathBuf> {
    if let Some(p) = explicit {
        return Some(p.to_path_buf());
    }
    let out = out?;
    if out_is_dir {
        Some(out.join("manifest.json"))
    } else {
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest.json");
        Some(PathBuf::from(name))
    }
}
