use std::collections::BTreeMap;
use std::path::Path;
use std::time::SystemTime;

use serde::{Deserialize, Serialize};

use super::{write_bytes, RunConfig};
use crate::error::Result;

/// Record of one run: what was asked, with which configuration, and what
/// came out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// RFC 3339, UTC, whole seconds.
    pub timestamp: String,
    pub command: Vec<String>,
    /// Configuration after command-line overrides.
    pub config: RunConfig,
    /// Output path → SHA-256 of its bytes.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: Vec<String>, config: RunConfig) -> Self {
        Self {
            tool: "cptsim".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp: humantime::format_rfc3339_seconds(SystemTime::now()).to_string(),
            command,
            config,
            outputs: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, path: &Path, checksum: String) {
        self.outputs.insert(path.display().to_string(), checksum);
    }

    pub fn write(&self, path: &Path) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).expect("manifest always serializes");
        s.push('\n');
        write_bytes(path, s.as_bytes())
    }
}
