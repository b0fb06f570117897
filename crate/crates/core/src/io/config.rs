//! Declarative experiment configuration in TOML.
//!
//! ```toml
//! seed = 7
//! output_dir = "runs/demo"
//!
//! [data]
//! train = "train.csv"
//! valid = "valid.csv"
//! test = "test.csv"
//!
//! [structure]
//! hidden_states = 8
//! smoothing = 0.1
//!
//! [em]
//! batch_size = 256
//! smoothing = 0.01
//! schedule = [
//!     { alpha_start = 1.0, alpha_end = 0.1, epochs = 50 },
//!     { alpha_start = 0.1, alpha_end = 0.01, epochs = 50 },
//! ]
//!
//! [loop]
//! prune_fraction = 0.75
//! grow_sigma2 = 0.1
//! max_iterations = 5
//! patience = 2
//!
//! [compress]
//! step_fraction = 0.1
//! ll_budget = 0.01
//! max_steps = 20
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.
//! The top-level seed is required and seeds every section that does not set
//! its own.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structures::HcltConfig;
use crate::train::{EmConfig, LoopConfig};
use crate::RngSeed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub train: PathBuf,
    #[serde(default)]
    pub valid: Option<PathBuf>,
    #[serde(default)]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompressConfig {
    pub step_fraction: f64,
    pub ll_budget: f64,
    pub max_steps: usize,
}

impl Default for CompressConfig {
    fn default() -> Self {
        Self { step_fraction: 0.1, ll_budget: 0.01, max_steps: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    pub data: DataPaths,
    #[serde(default)]
    pub structure: HcltConfig,
    #[serde(default)]
    pub em: EmConfig,
    #[serde(default, rename = "loop")]
    pub structure_loop: LoopConfig,
    #[serde(default)]
    pub compress: CompressConfig,
}

const SECTION_STRUCTURE: u64 = 0;
const SECTION_EM: u64 = 1;
const SECTION_LOOP: u64 = 2;

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Default settings for `data`, with every section seeded from `seed`.
    pub fn with_defaults(seed: u64, data: DataPaths) -> Self {
        let mut cfg = ExperimentConfig {
            seed,
            output_dir: default_output(),
            data,
            structure: HcltConfig::default(),
            em: EmConfig::default(),
            structure_loop: LoopConfig::default(),
            compress: CompressConfig::default(),
        };
        cfg.reseed(seed);
        cfg
    }

    /// Sets the top-level seed and re-derives every section seed from it.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        let top = RngSeed(seed);
        self.structure.seed = top.derive(SECTION_STRUCTURE);
        self.em.seed = top.derive(SECTION_EM);
        self.structure_loop.seed = top.derive(SECTION_LOOP);
    }

    /// Parses TOML and checks value ranges. Paths are left as written.
    pub fn from_toml(text: &str) -> Result<Self> {
        let value: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut cfg: ExperimentConfig =
            value.clone().try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        // sections without their own seed inherit the top-level one
        let has_seed = |s: &str| value.get(s).and_then(|t| t.get("seed")).is_some();
        let top = RngSeed(cfg.seed);
        if !has_seed("structure") {
            cfg.structure.seed = top.derive(SECTION_STRUCTURE);
        }
        if !has_seed("em") {
            cfg.em.seed = top.derive(SECTION_EM);
        }
        if !has_seed("loop") {
            cfg.structure_loop.seed = top.derive(SECTION_LOOP);
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks value ranges of every section.
    pub fn check(&self) -> Result<()> {
        self.em.validate()?;
        self.structure_loop.validate()?;
        if self.structure.hidden_states == 0 {
            return Err(Error::Config("structure.hidden_states must be at least 1".into()));
        }
        let c = &self.compress;
        if !(c.step_fraction > 0.0 && c.step_fraction < 1.0) {
            return Err(Error::Config(format!("compress.step_fraction {} not in (0, 1)", c.step_fraction)));
        }
        if !(0.0..).contains(&c.ll_budget) {
            return Err(Error::Config(format!("compress.ll_budget {} is negative", c.ll_budget)));
        }
        Ok(())
    }

    /// Reads a config file, resolves relative paths against its directory and
    /// checks that the referenced data files exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        cfg.output_dir = resolve(&cfg.output_dir);
        cfg.data.train = resolve(&cfg.data.train);
        cfg.data.valid = cfg.data.valid.as_deref().map(resolve);
        cfg.data.test = cfg.data.test.as_deref().map(resolve);
        for p in [Some(&cfg.data.train), cfg.data.valid.as_ref(), cfg.data.test.as_ref()].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::Config(format!("data file {} does not exist", p.display())));
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
seed = 7
[data]
train = "train.csv"
[em]
batch_size = 32
schedule = [{ alpha_start = 1.0, alpha_end = 0.5, epochs = 3 }]
[loop]
max_iterations = 2
seed = 99
"#;

    #[test]
    fn parses_with_defaults_and_seeds() {
        let cfg = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        assert_eq!(cfg.em.batch_size, 32);
        assert_eq!(cfg.em.smoothing, EmConfig::default().smoothing);
        assert_eq!(cfg.em.total_epochs(), 3);
        assert_eq!(cfg.structure_loop.seed, RngSeed(99));
        assert_eq!(cfg.em.seed, RngSeed(7).derive(1));
        assert_eq!(cfg.structure_loop.prune_fraction, 0.75);
        let fresh = ExperimentConfig::with_defaults(7, cfg.data.clone());
        assert_eq!(fresh.structure.seed, cfg.structure.seed);
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn seed_is_required_and_ranges_checked() {
        assert!(ExperimentConfig::from_toml("[data]\ntrain = \"x\"\n").is_err());
        let bad = format!("{EXAMPLE}\n[compress]\nstep_fraction = 1.5\n");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Config(_))));
        let bad = EXAMPLE.replace("batch_size = 32", "batch_size = 0");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
        assert!(ExperimentConfig::from_toml(&format!("bogus = 1\n{EXAMPLE}")).is_err());
        assert!(ExperimentConfig::from_toml(&format!("{EXAMPLE}\nbogus = 1\n")).is_err());
    }

    #[test]
    fn missing_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        fs::write(&path, EXAMPLE).unwrap();
        assert!(matches!(ExperimentConfig::load(&path), Err(Error::Config(_))));
        fs::write(dir.path().join("train.csv"), "2\n0\n").unwrap();
        let cfg = ExperimentConfig::load(&path).unwrap();
        assert_eq!(cfg.data.train, dir.path().join("train.csv"));
    }
}
