use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitScheme {
    /// One stratified holdout split per subject.
    #[serde(rename = "dep")]
    SubjectDependent,
    /// One stratified holdout split over all subjects pooled.
    #[serde(rename = "indep")]
    SubjectIndependent,
    /// Stratified k-fold cross-validation over all samples.
    #[serde(rename = "kfold")]
    KFold,
}

impl SplitScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitScheme::SubjectDependent => "dep",
            SplitScheme::SubjectIndependent => "indep",
            SplitScheme::KFold => "kfold",
        }
    }
}

impl fmt::Display for SplitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitScheme {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dep" => Ok(SplitScheme::SubjectDependent),
            "indep" => Ok(SplitScheme::SubjectIndependent),
            "kfold" => Ok(SplitScheme::KFold),
            other => Err(DataError::UnknownScheme(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitPlan {
    pub scheme: SplitScheme,
    pub k: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitPlan {
    fn default() -> Self {
        Self {
            scheme: SplitScheme::KFold,
            k: 5,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub name: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// SHA-256 over the train and test index lists, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for &i in &self.train {
            h.update((i as u64).to_le_bytes());
        }
        h.update(u64::MAX.to_le_bytes());
        for &i in &self.test {
            h.update((i as u64).to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Indices grouped by class, each group shuffled.
fn shuffled_by_class(indices: &[usize], labels: &[usize], rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in indices {
        groups.entry(labels[i]).or_default().push(i);
    }
    groups
        .into_values()
        .map(|mut g| {
            g.shuffle(rng);
            g
        })
        .collect()
}

fn holdout(
    name: String,
    indices: &[usize],
    labels: &[usize],
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Split, DataError> {
    if indices.len() < 2 {
        return Err(DataError::TooFewSamples(format!(
            "split {name} has {} sample(s), need at least 2",
            indices.len()
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for group in shuffled_by_class(indices, labels, rng) {
        let n_test = (group.len() as f64 * fraction).round() as usize;
        test.extend_from_slice(&group[..n_test]);
        train.extend_from_slice(&group[n_test..]);
    }
    if test.is_empty() || train.is_empty() {
        return Err(DataError::TooFewSamples(format!(
            "split {name}: {} train / {} test",
            train.len(),
            test.len()
        )));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { name, train, test })
}

/// Materializes the train/test index lists of a plan. Deterministic in
/// `plan.seed`.
pub fn make_splits<S: AsRef<str>>(
    labels: &[usize],
    subjects: &[S],
    plan: &SplitPlan,
) -> Result<Vec<Split>, DataError> {
    assert_eq!(labels.len(), subjects.len(), "one subject per sample");
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let all: Vec<usize> = (0..labels.len()).collect();
    match plan.scheme {
        SplitScheme::SubjectIndependent => Ok(vec![holdout(
            "pooled".into(),
            &all,
            labels,
            plan.test_fraction,
            &mut rng,
        )?]),
        SplitScheme::SubjectDependent => {
            let mut by_subject: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, s) in subjects.iter().enumerate() {
                by_subject.entry(s.as_ref()).or_default().push(i);
            }
            by_subject
                .into_iter()
                .map(|(s, idx)| holdout(s.to_string(), &idx, labels, plan.test_fraction, &mut rng))
                .collect()
        }
        SplitScheme::KFold => {
            let k = plan.k;
            if k < 2 {
                return Err(DataError::TooFewSamples(format!("k = {k} folds")));
            }
            let groups = shuffled_by_class(&all, labels, &mut rng);
            if let Some(small) = groups.iter().find(|g| g.len() < k) {
                return Err(DataError::TooFewSamples(format!(
                    "class {} has {} sample(s), need at least {k}",
                    labels[small[0]],
                    small.len()
                )));
            }
            if groups.is_empty() {
                return Err(DataError::TooFewSamples("no samples".into()));
            }
            let mut fold_of = vec![0usize; labels.len()];
            for (pos, &i) in groups.iter().flatten().enumerate() {
                fold_of[i] = pos % k;
            }
            Ok((0..k)
                .map(|f| Split {
                    name: format!("fold{f}"),
                    train: all.iter().copied().filter(|&i| fold_of[i] != f).collect(),
                    test: all.iter().copied().filter(|&i| fold_of[i] == f).collect(),
                })
                .collect())
        }
    }
}
