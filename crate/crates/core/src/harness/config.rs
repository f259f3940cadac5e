//! TOML files read by the CLI. Every file must start with `version = 1`;
//! unknown keys are rejected. Relative paths inside a file resolve against
//! the file's own directory.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::experiment::TrainingSetConfig;
use crate::harness::scenario::ScenarioConfig;
use crate::netsim::NetworkConfig;
use crate::protocol::CompressionConfig;
use crate::training::trainer::TrainConfig;

pub const CONFIG_VERSION: u32 = 1;

pub trait ConfigFile: DeserializeOwned {
    fn validate(&self) -> Result<()>;
}

impl ConfigFile for ScenarioConfig {
    fn validate(&self) -> Result<()> {
        ScenarioConfig::validate(self)
    }
}

/// `coopertrim train` input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainFile {
    pub version: u32,
    /// Where the trained checkpoint is written.
    pub checkpoint: PathBuf,
    /// Per-epoch CSV.
    pub history: PathBuf,
    pub training_set: TrainingSetConfig,
    pub train: TrainConfig,
}

impl Default for TrainFile {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            checkpoint: "model.ckpt".into(),
            history: "train_history.csv".into(),
            training_set: TrainingSetConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl ConfigFile for TrainFile {
    fn validate(&self) -> Result<()> {
        self.training_set.validate()?;
        self.training_set.scenario.validate()?;
        self.train.validate()
    }
}

/// `coopertrim experiment` input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentFile {
    pub version: u32,
    pub checkpoint: PathBuf,
    pub out_dir: PathBuf,
    pub network_seed: u64,
    /// Baseline network; each sweep overrides only its own axis.
    pub network: NetworkConfig,
    pub compression: CompressionConfig,
    pub scenario: ScenarioConfig,
}

impl Default for ExperimentFile {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            checkpoint: "model.ckpt".into(),
            out_dir: "results".into(),
            network_seed: 7,
            network: NetworkConfig::default(),
            compression: CompressionConfig::default(),
            scenario: ScenarioConfig::two_phase(1234, 40, 0, 6),
        }
    }
}

impl ConfigFile for ExperimentFile {
    fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.scenario.validate()
    }
}

/// Parses and validates one config, insisting on a top-level `version = 1`.
pub fn parse<T: ConfigFile>(text: &str) -> Result<T> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    match table.get("version").and_then(|v| v.as_integer()) {
        Some(v) if v == i64::from(CONFIG_VERSION) => {}
        Some(v) => return Err(Error::Config(format!("unsupported config version {v}"))),
        None => return Err(Error::Config("missing `version = 1` header".into())),
    }
    let cfg: T = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load<T: ConfigFile>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// `path` relative to the directory holding `config`.
pub fn resolve(config: &Path, path: &Path) -> PathBuf {
    match config.parent() {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

pub fn to_toml<T: Serialize>(cfg: &T) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip() {
        let train = TrainFile::default();
        assert_eq!(parse::<TrainFile>(&to_toml(&train).unwrap()).unwrap(), train);
        let exp = ExperimentFile::default();
        assert_eq!(parse::<ExperimentFile>(&to_toml(&exp).unwrap()).unwrap(), exp);
        let sc = ScenarioConfig::default();
        assert_eq!(parse::<ScenarioConfig>(&to_toml(&sc).unwrap()).unwrap(), sc);
    }

    #[test]
    fn version_header_required() {
        assert!(matches!(parse::<TrainFile>("checkpoint = \"a\""), Err(Error::Config(_))));
        assert!(matches!(parse::<TrainFile>("version = 2"), Err(Error::Config(_))));
        assert!(parse::<TrainFile>("version = 1").is_ok());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse::<TrainFile>("version = 1\n[train]\nlearning_rat = 0.1").is_err());
        assert!(parse::<ExperimentFile>("version = 1\nout = \"x\"").is_err());
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let f: ExperimentFile = parse("version = 1\n[network]\nloss_rate = 0.5\n").unwrap();
        assert_eq!(f.network.loss_rate, 0.5);
        assert_eq!(f.network.full_link_mbps, 40.0);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(parse::<TrainFile>("version = 1\n[train]\nepsilon = 1.5").is_err());
        assert!(parse::<ExperimentFile>("version = 1\n[network]\nloss_rate = -0.1").is_err());
    }

    #[test]
    fn resolve_relative_to_config() {
        assert_eq!(resolve(Path::new("cfg/a.toml"), Path::new("m.ckpt")), PathBuf::from("cfg/m.ckpt"));
        assert_eq!(resolve(Path::new("cfg/a.toml"), Path::new("/abs")), PathBuf::from("/abs"));
    }
}
