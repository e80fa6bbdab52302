//! Run manifests and the single-writer output collector.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub artifact_version: String,
    pub config: ExperimentConfig,
    pub status: RunStatus,
    pub started_unix_ms: u128,
    pub wall_clock_seconds: Option<f64>,
    /// Child seeds by stream label.
    pub seeds: BTreeMap<String, u64>,
    pub outputs: Vec<String>,
    pub error: Option<String>,
}

/// Owns the output directory; every file is written from here.
pub struct Collector {
    pub dir: PathBuf,
    manifest: RunManifest,
    started: Instant,
}

impl Collector {
    pub fn start(dir: PathBuf, command: &str, config: &ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        let manifest = RunManifest {
            command: command.into(),
            artifact_version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            status: RunStatus::Running,
            started_unix_ms: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0),
            wall_clock_seconds: None,
            seeds: BTreeMap::new(),
            outputs: Vec::new(),
            error: None,
        };
        let c = Self { dir, manifest, started: Instant::now() };
        std::fs::write(c.dir.join("config.toml"), config.to_toml())?;
        c.write_manifest()?;
        Ok(c)
    }

    fn write_manifest(&self) -> Result<()> {
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&self.manifest)?)
            .with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn seed(&mut self, label: &str, seed: u64) {
        self.manifest.seeds.insert(label.into(), seed);
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.manifest.outputs.push(name.into());
        Ok(())
    }

    pub fn finish(mut self, outcome: &Result<()>) -> Result<()> {
        self.manifest.wall_clock_seconds = Some(self.started.elapsed().as_secs_f64());
        match outcome {
            Ok(()) => self.manifest.status = RunStatus::Complete,
            Err(e) => {
                self.manifest.status = RunStatus::Failed;
                self.manifest.error = Some(format!("{e:#}"));
            }
        }
        self.write_manifest()
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

/// Rows of the shared scan schema `param,value,estimate,half_width,n_samples`.
#[derive(Debug, Default)]
pub struct ScanCsv {
    body: String,
}

impl ScanCsv {
    pub const HEADER: &'static str = "param,value,estimate,half_width,n_samples";

    pub fn row(&mut self, param: &str, value: impl std::fmt::Display, estimate: f64, half_width: f64, n: u64) {
        let _ = writeln!(self.body, "{param},{value},{estimate},{half_width},{n}");
    }

    pub fn finish(self) -> String {
        format!("{}\n{}", Self::HEADER, self.body)
    }
}
