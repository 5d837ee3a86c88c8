use std::path::{Path, PathBuf};

use netlock::learners::{ForestParams, NetworkParams};
use netlock::lock::HeuristicKind;
use netlock::locality::MAX_SIZE;
use netlock::rewrite::DEFAULT_MAX_PASSES;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_BUDGET: u64 = 10_000;

/// Every setting of a run. Written into each artifact the run produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub keys: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub models: Option<PathBuf>,
    /// Circuits to evaluate: bundled names or bench paths.
    pub originals: Vec<String>,
    pub bits: Option<usize>,
    pub key: Option<String>,
    pub key_ratios: Vec<f64>,
    pub heuristics: Vec<HeuristicKind>,
    pub seed: u64,
    pub instances: usize,
    pub instance_bits: Option<usize>,
    pub max_passes: usize,
    pub forest: ForestParams,
    pub network: NetworkParams,
    pub boost_size: usize,
    /// `None` runs both the boosted and the unboosted attack.
    pub boost: Option<bool>,
    pub budget: u64,
    pub workers: Option<usize>,
    pub format: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: String::new(),
            input: None,
            output: None,
            log: None,
            keys: None,
            dataset: None,
            models: None,
            originals: Vec::new(),
            bits: None,
            key: None,
            key_ratios: vec![1.0],
            heuristics: vec![HeuristicKind::Rnd],
            seed: 0,
            instances: 3,
            instance_bits: None,
            max_passes: DEFAULT_MAX_PASSES,
            forest: ForestParams::default(),
            network: NetworkParams::default(),
            boost_size: MAX_SIZE,
            boost: None,
            budget: DEFAULT_BUDGET,
            workers: None,
            format: None,
        }
    }
}

impl RunConfig {
    /// Defaults overlaid with a TOML file.
    pub fn from_file(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn require<'a, T>(&self, v: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
        v.as_ref()
            .ok_or_else(|| CliError::Usage(format!("`{}` needs --{flag}", self.command)))
    }

    pub fn single_heuristic(&self) -> Result<HeuristicKind, CliError> {
        match self.heuristics.as_slice() {
            [h] => Ok(*h),
            _ => Err(CliError::Usage(format!(
                "`{}` takes exactly one heuristic",
                self.command
            ))),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is plain data")
    }

    /// Provenance lines for text artifacts.
    pub fn header(&self) -> Vec<String> {
        vec![
            format!("netlock {}", env!("CARGO_PKG_VERSION")),
            format!("config: {}", serde_json::to_string(self).expect("config is plain data")),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_toml_keeps_defaults() {
        let c: RunConfig = toml::from_str("seed = 7\nheuristics = [\"cs\"]\n[forest]\ntrees = 5\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.heuristics, vec![HeuristicKind::Cs]);
        assert_eq!(c.forest.trees, 5);
        assert_eq!(c.forest.max_depth, ForestParams::default().max_depth);
        assert_eq!(c.instances, 3);
        assert!(toml::from_str::<RunConfig>("sed = 7").is_err());
    }
}
