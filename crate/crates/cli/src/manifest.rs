//! Every artifact-writing command drops a `manifest.json` beside its
//! outputs: the command, the complete flag set, every seed, the artifact
//! names, and the wall-clock duration. Re-running the tool with the
//! flags and seeds recorded here regenerates each artifact byte for byte
//! (the manifest itself is the one file that varies, since it carries the
//! duration).

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    /// Every flag the command ran with, stringified, in sorted order.
    pub flags: BTreeMap<String, String>,
    /// Every seed that influenced the run, by role.
    pub seeds: BTreeMap<String, u64>,
    /// File names written next to this manifest.
    pub artifacts: Vec<String>,
    pub duration_seconds: f64,
    #[serde(skip)]
    started: Instant,
}

impl RunManifest {
    pub fn new(command: &'static str) -> Self {
        Self {
            tool: "zlpr",
            version: env!("CARGO_PKG_VERSION"),
            command,
            flags: BTreeMap::new(),
            seeds: BTreeMap::new(),
            artifacts: Vec::new(),
            duration_seconds: 0.0,
            started: Instant::now(),
        }
    }

    pub fn flag(&mut self, name: &str, value: impl Display) -> &mut Self {
        self.flags.insert(name.to_string(), value.to_string());
        self
    }

    pub fn seed(&mut self, role: &str, value: u64) -> &mut Self {
        self.seeds.insert(role.to_string(), value);
        self
    }

    pub fn artifact(&mut self, name: &str) -> &mut Self {
        self.artifacts.push(name.to_string());
        self
    }

    /// Stamps the duration and writes `manifest.json` into `dir`.
    pub fn write(&mut self, dir: &Path) -> Result<(), CliError> {
        self.duration_seconds = self.started.elapsed().as_secs_f64();
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Io(format!("manifest serialization: {e}")))?;
        std::fs::write(dir.join("manifest.json"), body + "\n")?;
        Ok(())
    }
}
