use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DataError;

/// Ratings strictly above this are "high".
pub const RATING_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LabelRecord {
    /// Self-assessment ratings on the 1-9 scale.
    Deap {
        arousal: f64,
        valence: f64,
        dominance: f64,
        liking: f64,
    },
    /// -1 negative, 0 neutral, 1 positive.
    Seed { class: i32 },
    Synthetic { class: usize },
}

impl LabelRecord {
    fn kind(&self) -> &'static str {
        match self {
            LabelRecord::Deap { .. } => "deap",
            LabelRecord::Seed { .. } => "seed",
            LabelRecord::Synthetic { .. } => "synthetic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Arousal,
    Valence,
    #[serde(rename = "four")]
    FourClass,
    Seed3,
    Synth,
}

impl Task {
    /// Number of classes, or `None` for synthetic data where it depends on
    /// the generator.
    pub fn classes(&self) -> Option<usize> {
        match self {
            Task::Arousal | Task::Valence => Some(2),
            Task::FourClass => Some(4),
            Task::Seed3 => Some(3),
            Task::Synth => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Arousal => "arousal",
            Task::Valence => "valence",
            Task::FourClass => "four",
            Task::Seed3 => "seed3",
            Task::Synth => "synth",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "arousal" => Ok(Task::Arousal),
            "valence" => Ok(Task::Valence),
            "four" | "four_class" => Ok(Task::FourClass),
            "seed3" => Ok(Task::Seed3),
            "synth" => Ok(Task::Synth),
            other => Err(DataError::UnknownTask(other.to_string())),
        }
    }
}

fn high(rating: f64) -> usize {
    usize::from(rating > RATING_THRESHOLD)
}

/// Class index of a label record for a task.
pub fn derive_label(record: &LabelRecord, task: Task) -> Result<usize, DataError> {
    match (record, task) {
        (LabelRecord::Deap { arousal, .. }, Task::Arousal) => Ok(high(*arousal)),
        (LabelRecord::Deap { valence, .. }, Task::Valence) => Ok(high(*valence)),
        (LabelRecord::Deap { arousal, valence, .. }, Task::FourClass) => {
            Ok(2 * high(*arousal) + high(*valence))
        }
        (LabelRecord::Seed { class }, Task::Seed3) => match class {
            -1..=1 => Ok((class + 1) as usize),
            other => Err(DataError::InvalidSeedLabel(*other)),
        },
        (LabelRecord::Synthetic { class }, Task::Synth) => Ok(*class),
        (record, task) => Err(DataError::VariantMismatch {
            record: record.kind(),
            task,
        }),
    }
}
