//! Fold-diverse ensembles of 3D CNNs and their combiners.

mod vote;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use vote::{argmax, average_combine, vote, VoteMatrix, ROW_SUM_TOL};

use crate::fold::{fold_cube, FoldError, FoldStrategy};
use crate::grid::Grid;
use crate::nn::{build_network, fit, load_checkpoint, save_checkpoint, ArchConfig, Batch, Network, NnError, Tensor4, TrainConfig};

pub const MANIFEST: &str = "ensemble.toml";
/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "SFENET_THREADS";

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("ensemble has no members")]
    EmptyEnsemble,
    #[error("row {row} has {len} entries, expected {classes}")]
    RaggedRow { row: usize, len: usize, classes: usize },
    #[error("row {row} sums to {sum}, expected 1")]
    NotNormalized { row: usize, sum: f64 },
    #[error("vote row {0} is not one-hot")]
    NotOneHot(usize),
    #[error("unknown combiner `{0}` (expected vote or average)")]
    UnknownCombiner(String),
    #[error("bad ensemble manifest: {0}")]
    Manifest(String),
    #[error("no folded view for strategy {0}")]
    MissingView(FoldStrategy),
    #[error(transparent)]
    Fold(#[from] FoldError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combiner {
    Vote,
    Average,
}

impl fmt::Display for Combiner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Combiner::Vote => "vote",
            Combiner::Average => "average",
        })
    }
}

impl FromStr for Combiner {
    type Err = EnsembleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vote" => Ok(Combiner::Vote),
            "average" => Ok(Combiner::Average),
            other => Err(EnsembleError::UnknownCombiner(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberSpec {
    pub strategy: FoldStrategy,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub members: Vec<MemberSpec>,
    pub combiner: Combiner,
    pub classes: usize,
    /// Shared by every member.
    pub arch: ArchConfig,
    /// Train members concurrently, one per worker.
    #[serde(default)]
    pub parallel: bool,
}

impl EnsembleSpec {
    /// Members with the given strategies and seeds `seed, seed + 1, ...`.
    pub fn from_strategies(strategies: &[FoldStrategy], combiner: Combiner, classes: usize, seed: u64) -> Self {
        Self {
            members: strategies
                .iter()
                .enumerate()
                .map(|(i, &strategy)| MemberSpec {
                    strategy,
                    seed: seed.wrapping_add(i as u64),
                })
                .collect(),
            combiner,
            classes,
            arch: ArchConfig::default(),
            parallel: false,
        }
    }

    /// The five folded views, combined by vote.
    pub fn sfe(classes: usize, seed: u64) -> Self {
        Self::from_strategies(&FoldStrategy::FOLDED, Combiner::Vote, classes, seed)
    }

    /// `count` copies of one strategy that differ only by seed.
    pub fn repeated(strategy: FoldStrategy, count: usize, combiner: Combiner, classes: usize, seed: u64) -> Self {
        Self::from_strategies(&vec![strategy; count], combiner, classes, seed)
    }

    pub fn strategies(&self) -> Vec<FoldStrategy> {
        let mut s: Vec<FoldStrategy> = self.members.iter().map(|m| m.strategy).collect();
        s.sort();
        s.dedup();
        s
    }
}

/// Network inputs of every sample under each fold strategy, plus labels.
#[derive(Debug, Clone)]
pub struct FoldedViews {
    views: BTreeMap<FoldStrategy, Vec<Tensor4<f32>>>,
    labels: Vec<usize>,
}

/// A folded cube as a single-map network input.
pub fn cube_tensor(frames: &[Grid], strategy: FoldStrategy) -> Result<Tensor4<f32>, EnsembleError> {
    let cube = fold_cube(frames, strategy)?;
    let dims = [1, cube.depth, cube.height, cube.width];
    Ok(Tensor4::new(dims, cube.values.iter().map(|&v| v as f32).collect())?)
}

impl FoldedViews {
    /// Folds each sample's frame sequence under every strategy.
    pub fn build(samples: &[Vec<Grid>], labels: &[usize], strategies: &[FoldStrategy]) -> Result<Self, EnsembleError> {
        if samples.len() != labels.len() {
            return Err(EnsembleError::Manifest(format!(
                "{} samples, {} labels",
                samples.len(),
                labels.len()
            )));
        }
        let mut views = BTreeMap::new();
        for &s in strategies {
            if views.contains_key(&s) {
                continue;
            }
            let cubes = samples
                .iter()
                .map(|frames| cube_tensor(frames, s))
                .collect::<Result<Vec<_>, _>>()?;
            views.insert(s, cubes);
        }
        Ok(Self {
            views,
            labels: labels.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn view(&self, strategy: FoldStrategy) -> Result<&[Tensor4<f32>], EnsembleError> {
        self.views
            .get(&strategy)
            .map(Vec::as_slice)
            .ok_or(EnsembleError::MissingView(strategy))
    }
}

#[derive(Debug, Clone)]
pub struct Member {
    pub spec: MemberSpec,
    pub net: Network<f32>,
    /// Mean training objective per epoch.
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub spec: EnsembleSpec,
    pub members: Vec<Member>,
}

/// One combined prediction with its evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub matrix: VoteMatrix,
}

impl Prediction {
    /// Each member's own arg-max class.
    pub fn member_classes(&self) -> Vec<usize> {
        self.matrix.votes().iter().map(|r| argmax(r)).collect()
    }
}

/// Worker count: `SFENET_THREADS` if set to a positive integer, else the
/// available parallelism.
pub fn worker_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn shuffle_seed(seed: u64) -> u64 {
    seed ^ 0x5EED_5EED_5EED_5EED
}

fn train_member(
    views: &FoldedViews,
    train: &[usize],
    spec: &EnsembleSpec,
    member: MemberSpec,
    hyper: &TrainConfig,
) -> Result<Member, EnsembleError> {
    let cubes = views.view(member.strategy)?;
    let first = train
        .first()
        .ok_or_else(|| EnsembleError::Manifest("empty training set".into()))?;
    let mut net = build_network::<f32>(cubes[*first].dims(), spec.classes, &spec.arch, member.seed)?;
    let samples: Vec<&Tensor4<f32>> = train.iter().map(|&i| &cubes[i]).collect();
    let labels: Vec<usize> = train.iter().map(|&i| views.labels[i]).collect();
    let losses = fit(&mut net, &samples, &labels, hyper, shuffle_seed(member.seed))?;
    Ok(Member {
        spec: member,
        net,
        losses,
    })
}

/// Trains every member on the `train` indices of its own fold view.
pub fn train_sfe(
    views: &FoldedViews,
    train: &[usize],
    spec: &EnsembleSpec,
    hyper: &TrainConfig,
) -> Result<Ensemble, EnsembleError> {
    if spec.members.is_empty() {
        return Err(EnsembleError::EmptyEnsemble);
    }
    let members = if spec.parallel {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(worker_count().min(spec.members.len()))
            .build()
            .map_err(|e| EnsembleError::Manifest(e.to_string()))?;
        pool.install(|| {
            spec.members
                .par_iter()
                .map(|&m| train_member(views, train, spec, m, hyper))
                .collect::<Result<Vec<_>, _>>()
        })?
    } else {
        spec.members
            .iter()
            .map(|&m| train_member(views, train, spec, m, hyper))
            .collect::<Result<Vec<_>, _>>()?
    };
    Ok(Ensemble {
        spec: spec.clone(),
        members,
    })
}

const EVAL_BATCH: usize = 64;

fn member_probs(net: &Network<f32>, cubes: &[&Tensor4<f32>]) -> Result<Vec<Vec<f64>>, EnsembleError> {
    let mut out = Vec::with_capacity(cubes.len());
    for chunk in cubes.chunks(EVAL_BATCH) {
        let owned: Vec<Tensor4<f32>> = chunk.iter().map(|t| (*t).clone()).collect();
        out.extend(net.predict_proba(&Batch::from_samples(&owned)?)?);
    }
    Ok(out)
}

/// Rows are renormalized in f64 so f32 softmax rounding never trips the
/// row-sum check.
fn renormalize(mut row: Vec<f64>) -> Vec<f64> {
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= s);
    row
}

impl Ensemble {
    pub fn combine(&self, matrix: &VoteMatrix) -> Result<usize, EnsembleError> {
        match self.spec.combiner {
            Combiner::Vote => vote(matrix),
            Combiner::Average => average_combine(matrix.probs().ok_or(EnsembleError::EmptyEnsemble)?),
        }
    }

    /// Eval-mode predictions for the samples at `indices`.
    pub fn predict(&self, views: &FoldedViews, indices: &[usize]) -> Result<Vec<Prediction>, EnsembleError> {
        let mut per_member = Vec::with_capacity(self.members.len());
        for m in &self.members {
            let cubes = views.view(m.spec.strategy)?;
            let picked: Vec<&Tensor4<f32>> = indices.iter().map(|&i| &cubes[i]).collect();
            per_member.push(member_probs(&m.net, &picked)?);
        }
        (0..indices.len())
            .map(|k| {
                let rows = per_member.iter().map(|p| renormalize(p[k].clone())).collect();
                let matrix = VoteMatrix::from_probabilities(rows)?;
                Ok(Prediction {
                    class: self.combine(&matrix)?,
                    matrix,
                })
            })
            .collect()
    }

    /// Prediction for one interpolated frame sequence.
    pub fn predict_sample(&self, frames: &[Grid]) -> Result<Prediction, EnsembleError> {
        let rows = self
            .members
            .iter()
            .map(|m| {
                let x = Batch::from_samples(&[cube_tensor(frames, m.spec.strategy)?])?;
                Ok(renormalize(m.net.predict_proba(&x)?.remove(0)))
            })
            .collect::<Result<Vec<_>, EnsembleError>>()?;
        let matrix = VoteMatrix::from_probabilities(rows)?;
        Ok(Prediction {
            class: self.combine(&matrix)?,
            matrix,
        })
    }

    /// Writes one checkpoint directory per member and `ensemble.toml`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<EnsembleManifest, EnsembleError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut entries = Vec::new();
        for (i, m) in self.members.iter().enumerate() {
            let checkpoint = format!("member{i}_{}", m.spec.strategy);
            save_checkpoint(&m.net, dir.join(&checkpoint))?;
            entries.push(ManifestMember {
                strategy: m.spec.strategy,
                seed: m.spec.seed,
                checkpoint,
            });
        }
        let manifest = EnsembleManifest {
            combiner: self.spec.combiner,
            classes: self.spec.classes,
            members: entries,
        };
        let text = toml::to_string(&manifest).map_err(|e| EnsembleError::Manifest(e.to_string()))?;
        std::fs::write(dir.join(MANIFEST), text)?;
        Ok(manifest)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, EnsembleError> {
        let dir = dir.as_ref();
        let text = std::fs::read_to_string(dir.join(MANIFEST))?;
        let manifest: EnsembleManifest =
            toml::from_str(&text).map_err(|e| EnsembleError::Manifest(e.to_string()))?;
        if manifest.members.is_empty() {
            return Err(EnsembleError::EmptyEnsemble);
        }
        let mut members = Vec::new();
        for entry in &manifest.members {
            let net = load_checkpoint::<f32>(dir.join(&entry.checkpoint))?;
            if net.classes() != manifest.classes {
                return Err(EnsembleError::Manifest(format!(
                    "{} predicts {} classes, manifest says {}",
                    entry.checkpoint,
                    net.classes(),
                    manifest.classes
                )));
            }
            members.push(Member {
                spec: MemberSpec {
                    strategy: entry.strategy,
                    seed: entry.seed,
                },
                net,
                losses: Vec::new(),
            });
        }
        let arch = members[0].net.arch().clone();
        Ok(Self {
            spec: EnsembleSpec {
                members: members.iter().map(|m| m.spec).collect(),
                combiner: manifest.combiner,
                classes: manifest.classes,
                arch,
                parallel: false,
            },
            members,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestMember {
    pub strategy: FoldStrategy,
    pub seed: u64,
    pub checkpoint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub combiner: Combiner,
    pub classes: usize,
    pub members: Vec<ManifestMember>,
}
