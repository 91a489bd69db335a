use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::data::{SplitPlan, SynthSpec, Task};
use crate::ensemble::Combiner;
use crate::fold::FoldStrategy;
use crate::interp::{InterpMode, InterpParams};
use crate::montage::Montage;
use crate::nn::{ArchConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub strategies: Vec<FoldStrategy>,
    pub combiner: Combiner,
    /// Train members concurrently.
    pub parallel: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            strategies: FoldStrategy::FOLDED.to_vec(),
            combiner: Combiner::Vote,
            parallel: false,
        }
    }
}

/// Leading baseline segment to subtract and drop on import.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub baseline_seconds: f64,
    pub signal_seconds: f64,
}

/// Everything a run needs; a config plus its seed reproduces the metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub task: Task,
    /// EEGT dataset with a `.meta` sidecar; synthetic data when absent.
    pub dataset: Option<PathBuf>,
    pub synth: SynthSpec,
    /// `deap32`, `seed62`, or a path to a montage file.
    pub montage: String,
    /// Optional channel subset (montage names).
    pub channels: Option<Vec<String>>,
    pub baseline: Option<BaselineConfig>,
    pub interp: InterpMode,
    pub interp_params: InterpParams,
    pub window_seconds: f64,
    pub split: SplitPlan,
    pub ensemble: EnsembleConfig,
    pub arch: ArchConfig,
    pub train: TrainConfig,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            task: Task::Synth,
            dataset: None,
            synth: SynthSpec::default(),
            montage: "deap32".into(),
            channels: None,
            baseline: None,
            interp: InterpMode::BicubicEeg,
            interp_params: InterpParams::default(),
            window_seconds: 1.0,
            split: SplitPlan::default(),
            ensemble: EnsembleConfig::default(),
            arch: ArchConfig::default(),
            train: TrainConfig::default(),
            out: PathBuf::from("runs/sfenet"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Resolves the montage and applies the channel subset.
    pub fn resolve_montage(&self) -> Result<Montage, HarnessError> {
        let base = match self.montage.as_str() {
            "deap32" => Montage::deap32(),
            "seed62" => Montage::seed62(),
            path => Montage::load(path)?,
        };
        Ok(match &self.channels {
            Some(names) => base.restrict(names)?,
            None => base,
        })
    }

    /// Checks everything that can be checked without touching data, so a
    /// bad config fails before any training.
    pub fn validate(&self) -> Result<Montage, HarnessError> {
        let montage = self.resolve_montage()?;
        self.interp_params.validate()?;
        if let Some(path) = &self.dataset {
            if !path.exists() {
                return Err(HarnessError::Config(format!("dataset {} not found", path.display())));
            }
        }
        if self.ensemble.strategies.is_empty() {
            return Err(HarnessError::Config("ensemble needs at least one fold strategy".into()));
        }
        if !(self.window_seconds > 0.0) {
            return Err(HarnessError::Config(format!("window_seconds = {}", self.window_seconds)));
        }
        if self.train.batch_size == 0 {
            return Err(HarnessError::Config("batch_size = 0".into()));
        }
        if !(0.0..1.0).contains(&self.arch.dropout) {
            return Err(HarnessError::Config(format!("dropout = {}", self.arch.dropout)));
        }
        Ok(montage)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = ExperimentConfig::parse("seed = 4\ninterp = \"bilinear\"\n[ensemble]\nstrategies = [\"left\", \"up\"]\n").unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.interp, InterpMode::Bilinear);
        assert_eq!(cfg.ensemble.strategies, vec![FoldStrategy::LeftOnRight, FoldStrategy::TopOnBottom]);
        assert_eq!(cfg.train.batch_size, 32);
        assert!(ExperimentConfig::parse("[ensemble]\nstrategies = [\"sideways\"]").is_err());
    }

    #[test]
    fn missing_montage_fails_validation() {
        let cfg = ExperimentConfig {
            montage: "/nonexistent/montage.cfg".into(),
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::default().validate().is_ok());
    }
}
