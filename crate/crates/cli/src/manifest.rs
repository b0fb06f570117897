use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use circuitflow::io::{ExperimentConfig, BINARY_VERSION, DATASET_VERSION, TEXT_VERSION};
use serde::Serialize;

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Serialize)]
struct Versions {
    circuitflow: &'static str,
    text_format: u32,
    binary_format: u32,
    dataset_format: u32,
}

/// Everything needed to rerun a command: its arguments, resolved settings,
/// seed and the versions that produced the outputs. No timestamps, so an
/// identical rerun writes an identical manifest.
#[derive(Debug, Serialize)]
pub struct Manifest {
    command: String,
    argv: Vec<String>,
    seed: Option<u64>,
    versions: Versions,
    params: toml::Table,
    outputs: Vec<String>,
    experiment: Option<ExperimentConfig>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().collect(),
            seed: None,
            versions: Versions {
                circuitflow: env!("CARGO_PKG_VERSION"),
                text_format: TEXT_VERSION,
                binary_format: BINARY_VERSION,
                dataset_format: DATASET_VERSION,
            },
            params: toml::Table::new(),
            outputs: Vec::new(),
            experiment: None,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn experiment(mut self, cfg: &ExperimentConfig) -> Self {
        self.seed = Some(cfg.seed);
        self.experiment = Some(cfg.clone());
        self
    }

    pub fn param(mut self, key: &str, value: impl Into<toml::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string(self).context("serializing manifest")?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}
