//! Trial storage, preprocessing, labels, splits and synthetic data.

pub mod eegt;
mod labels;
mod preprocess;
mod split;
mod synth;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eegt::{read_tensor, write_tensor, EegtError, EegtTensor, TensorData};
pub use labels::{derive_label, LabelRecord, Task};
pub use preprocess::{normalize, remove_baseline, segment, Normalized, Sample};
pub use split::{make_splits, Split, SplitPlan, SplitScheme};
pub use synth::{class_electrodes, mirror_pairs, synth_dataset, SynthSpec};

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Eegt(#[from] EegtError),
    #[error("trial length {got} does not match expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("label record {record} cannot serve task {task}")]
    VariantMismatch { record: &'static str, task: Task },
    #[error("seed label {0} outside {{-1, 0, 1}}")]
    InvalidSeedLabel(i32),
    #[error("too few samples: {0}")]
    TooFewSamples(String),
    #[error("invalid window: {0}")]
    BadWindow(String),
    #[error("dataset tensor must be trials x channels x time, got dims {0:?}")]
    BadDatasetShape(Vec<usize>),
    #[error("metadata inconsistent with tensor: {0}")]
    MetaMismatch(String),
    #[error("failed to parse metadata {path}: {message}")]
    Meta { path: PathBuf, message: String },
    #[error("unknown task `{0}` (expected arousal, valence, four, seed3 or synth)")]
    UnknownTask(String),
    #[error("unknown split scheme `{0}` (expected dep, indep or kfold)")]
    UnknownScheme(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// A channels x samples matrix, row-major by channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    channels: usize,
    samples: usize,
    data: Vec<f64>,
}

impl Trial {
    pub fn zeros(channels: usize, samples: usize) -> Self {
        Self {
            channels,
            samples,
            data: vec![0.0; channels * samples],
        }
    }

    pub fn from_vec(channels: usize, samples: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), channels * samples, "trial data length mismatch");
        Self {
            channels,
            samples,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn get(&self, channel: usize, t: usize) -> f64 {
        self.data[channel * self.samples + t]
    }

    pub fn row(&self, channel: usize) -> &[f64] {
        &self.data[channel * self.samples..(channel + 1) * self.samples]
    }

    pub fn row_mut(&mut self, channel: usize) -> &mut [f64] {
        &mut self.data[channel * self.samples..(channel + 1) * self.samples]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Columns `start..end` of every channel.
    pub fn columns(&self, start: usize, end: usize) -> Trial {
        let mut data = Vec::with_capacity(self.channels * (end - start));
        for ch in 0..self.channels {
            data.extend_from_slice(&self.row(ch)[start..end]);
        }
        Trial::from_vec(self.channels, end - start, data)
    }
}

/// Sidecar metadata stored next to an EEGT dataset as `<name>.meta` (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub channel_names: Vec<String>,
    pub rate_hz: f64,
    /// One subject identifier per trial.
    pub subjects: Vec<String>,
    pub labels: Vec<LabelRecord>,
}

/// All trials of a recording collection with their metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    pub trials: Vec<Trial>,
    pub channel_names: Vec<String>,
    pub rate_hz: f64,
    pub labels: Vec<LabelRecord>,
    pub subjects: Vec<String>,
}

impl TrialSet {
    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let n = self.trials.len();
        if self.labels.len() != n || self.subjects.len() != n {
            return Err(DataError::MetaMismatch(format!(
                "{n} trials, {} labels, {} subjects",
                self.labels.len(),
                self.subjects.len()
            )));
        }
        let samples = self.trials.first().map(Trial::samples).unwrap_or(0);
        for (i, t) in self.trials.iter().enumerate() {
            if t.channels() != self.channel_names.len() {
                return Err(DataError::MetaMismatch(format!(
                    "trial {i} has {} channels, metadata names {}",
                    t.channels(),
                    self.channel_names.len()
                )));
            }
            if t.samples() != samples {
                return Err(DataError::MetaMismatch(format!(
                    "trial {i} has {} samples, trial 0 has {samples}",
                    t.samples()
                )));
            }
        }
        if !(self.rate_hz > 0.0) {
            return Err(DataError::MetaMismatch(format!("rate {} Hz", self.rate_hz)));
        }
        Ok(())
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            channel_names: self.channel_names.clone(),
            rate_hz: self.rate_hz,
            subjects: self.subjects.clone(),
            labels: self.labels.clone(),
        }
    }

    /// Writes `<path>` (EEGT, trials x channels x time, f64) and the
    /// `.meta` sidecar next to it.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        self.validate()?;
        let path = path.as_ref();
        let channels = self.channel_names.len();
        let samples = self.trials.first().map(Trial::samples).unwrap_or(0);
        let mut data = Vec::with_capacity(self.trials.len() * channels * samples);
        for t in &self.trials {
            data.extend_from_slice(t.as_slice());
        }
        let tensor = EegtTensor::from_f64(vec![self.trials.len(), channels, samples], data)?;
        write_tensor(&tensor, path)?;
        let meta = toml::to_string(&self.meta()).map_err(|e| DataError::Meta {
            path: meta_path(path),
            message: e.to_string(),
        })?;
        std::fs::write(meta_path(path), meta)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let tensor = read_tensor(path)?;
        let mpath = meta_path(path);
        let text = std::fs::read_to_string(&mpath)?;
        let meta: DatasetMeta = toml::from_str(&text).map_err(|e| DataError::Meta {
            path: mpath.clone(),
            message: e.to_string(),
        })?;
        Self::from_tensor(&tensor, meta)
    }

    pub fn from_tensor(tensor: &EegtTensor, meta: DatasetMeta) -> Result<Self, DataError> {
        let dims = tensor.dims();
        if dims.len() != 3 {
            return Err(DataError::BadDatasetShape(dims.to_vec()));
        }
        let (n, channels, samples) = (dims[0], dims[1], dims[2]);
        if channels != meta.channel_names.len() {
            return Err(DataError::MetaMismatch(format!(
                "tensor has {channels} channels, metadata names {}",
                meta.channel_names.len()
            )));
        }
        let values = tensor.data().to_f64();
        let per_trial = channels * samples;
        let trials = (0..n)
            .map(|i| Trial::from_vec(channels, samples, values[i * per_trial..(i + 1) * per_trial].to_vec()))
            .collect();
        let set = TrialSet {
            trials,
            channel_names: meta.channel_names,
            rate_hz: meta.rate_hz,
            labels: meta.labels,
            subjects: meta.subjects,
        };
        set.validate()?;
        Ok(set)
    }
}

/// `<stem>.meta` next to a dataset file.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}
