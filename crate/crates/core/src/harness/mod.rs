//! Experiment orchestration: data pipeline, split loops, ablation suites
//! and report files.
//!
//! A run directory holds:
//!
//! - `config.toml`: the resolved configuration
//! - `metrics.csv` / `metrics.svg`: one row per condition
//! - `members.csv`: accuracy of every member on every split
//! - `splits.csv`: SHA-256 of each split's index lists, per condition
//! - `confusion/<condition>/<split>_<who>.csv`: confusion matrices
//! - `runtime.txt`: wall-clock seconds (not part of the deterministic output)

mod config;
mod pipeline;
mod report;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

pub use config::{BaselineConfig, EnsembleConfig, ExperimentConfig};
pub use pipeline::{load_trials, prepare, Prepared};
pub use report::{emit_report, MetricsRow, MetricsTable, CSV_HEADER};

use crate::data::{make_splits, DataError, Split};
use crate::ensemble::{train_sfe, Combiner, Ensemble, EnsembleError, EnsembleSpec, FoldedViews};
use crate::fold::{FoldError, FoldStrategy};
use crate::interp::{InterpError, InterpMode};
use crate::montage::MontageError;
use crate::nn::{accuracy, NnError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("metrics table is empty")]
    EmptyTable,
    #[error("report error: {0}")]
    Report(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Montage(#[from] MontageError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Fold(#[from] FoldError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Stable machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::EmptyTable => "empty_table",
            HarnessError::Report(_) => "report",
            HarnessError::Data(_) => "data",
            HarnessError::Montage(_) => "montage",
            HarnessError::Interp(_) => "interp",
            HarnessError::Fold(_) => "fold",
            HarnessError::Nn(_) => "nn",
            HarnessError::Ensemble(_) => "ensemble",
            HarnessError::Io(_) => "io",
        }
    }
}

/// Row names of the ensemble ablation.
pub const ENSEMBLE_CONDITIONS: [&str; 5] = [
    "Nofold_vote",
    "Leftfold_vote",
    "Upfold_vote",
    "Ourfold_average",
    "Ourfold_vote",
];

/// Members per ensemble in the ensemble ablation.
pub const ENSEMBLE_SIZE: usize = 5;

/// Confusion matrix, rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Confusion {
    pub counts: Vec<Vec<usize>>,
}

impl Confusion {
    pub fn new(classes: usize, truth: &[usize], predicted: &[usize]) -> Self {
        let mut counts = vec![vec![0; classes]; classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            counts[t][p] += 1;
        }
        Self { counts }
    }

    pub fn to_csv(&self) -> String {
        let classes = self.counts.len();
        let mut s = String::from("truth");
        for j in 0..classes {
            write!(s, ",pred{j}").unwrap();
        }
        s.push('\n');
        for (i, row) in self.counts.iter().enumerate() {
            write!(s, "{i}").unwrap();
            for c in row {
                write!(s, ",{c}").unwrap();
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub split: String,
    pub digest: String,
    /// Ensemble accuracy in percent.
    pub accuracy: f64,
    /// `(strategy, seed, accuracy)` per member.
    pub members: Vec<(FoldStrategy, u64, f64)>,
    pub confusion: Confusion,
    pub member_confusions: Vec<Confusion>,
}

impl SplitOutcome {
    pub fn member_mean(&self) -> f64 {
        self.members.iter().map(|m| m.2).sum::<f64>() / self.members.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionOutcome {
    pub condition: String,
    pub splits: Vec<SplitOutcome>,
}

impl ConditionOutcome {
    pub fn row(&self) -> MetricsRow {
        let acc: Vec<f64> = self.splits.iter().map(|s| s.accuracy).collect();
        MetricsRow::from_accuracies(self.condition.clone(), &acc)
    }
}

/// Everything a suite produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub table: MetricsTable,
    pub conditions: Vec<ConditionOutcome>,
}

/// Seed of member `i` on split `s` for a run seeded with `seed`.
fn member_seed_base(seed: u64, split: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(1000 * (split as u64 + 1))
}

fn spec_for(config: &ExperimentConfig, strategies: &[FoldStrategy], combiner: Combiner, classes: usize, split: usize) -> EnsembleSpec {
    let mut spec = EnsembleSpec::from_strategies(strategies, combiner, classes, member_seed_base(config.seed, split));
    spec.arch = config.arch.clone();
    spec.parallel = config.ensemble.parallel;
    spec
}

/// Prepared data plus its splits; shared by every condition of a suite.
pub struct Workspace {
    pub config: ExperimentConfig,
    pub prepared: Prepared,
    pub splits: Vec<Split>,
}

impl Workspace {
    pub fn new(config: &ExperimentConfig, interp: InterpMode) -> Result<Self, HarnessError> {
        let montage = config.validate()?;
        let set = load_trials(config, &montage)?;
        let prepared = prepare(config, &montage, &set, interp)?;
        let plan = crate::data::SplitPlan {
            seed: config.seed,
            ..config.split.clone()
        };
        let splits = make_splits(&prepared.labels, &prepared.subjects, &plan)?;
        Ok(Self {
            config: config.clone(),
            prepared,
            splits,
        })
    }

    pub fn views(&self, strategies: &[FoldStrategy]) -> Result<FoldedViews, HarnessError> {
        Ok(FoldedViews::build(&self.prepared.samples, &self.prepared.labels, strategies)?)
    }

    pub fn classes(&self) -> usize {
        self.prepared.classes
    }

    /// Trains and evaluates one ensemble configuration on every split.
    pub fn run_condition(
        &self,
        condition: &str,
        views: &FoldedViews,
        strategies: &[FoldStrategy],
        combiner: Combiner,
    ) -> Result<ConditionOutcome, HarnessError> {
        let classes = self.classes();
        let mut splits = Vec::with_capacity(self.splits.len());
        for (s, split) in self.splits.iter().enumerate() {
            let spec = spec_for(&self.config, strategies, combiner, classes, s);
            let ensemble = train_sfe(views, &split.train, &spec, &self.config.train)?;
            splits.push(evaluate(&ensemble, views, split, classes)?);
        }
        Ok(ConditionOutcome {
            condition: condition.to_string(),
            splits,
        })
    }
}

/// Scores a trained ensemble on a split's test indices.
pub fn evaluate(ensemble: &Ensemble, views: &FoldedViews, split: &Split, classes: usize) -> Result<SplitOutcome, HarnessError> {
    let preds = ensemble.predict(views, &split.test)?;
    let truth: Vec<usize> = split.test.iter().map(|&i| views.labels()[i]).collect();
    let combined: Vec<usize> = preds.iter().map(|p| p.class).collect();
    let per_member: Vec<Vec<usize>> = (0..ensemble.members.len())
        .map(|m| preds.iter().map(|p| p.member_classes()[m]).collect())
        .collect();
    Ok(SplitOutcome {
        split: split.name.clone(),
        digest: split.digest(),
        accuracy: accuracy(&combined, &truth),
        members: ensemble
            .members
            .iter()
            .zip(&per_member)
            .map(|(m, p)| (m.spec.strategy, m.spec.seed, accuracy(p, &truth)))
            .collect(),
        confusion: Confusion::new(classes, &truth, &combined),
        member_confusions: per_member.iter().map(|p| Confusion::new(classes, &truth, p)).collect(),
    })
}

fn write_suite(out: &Path, config: &ExperimentConfig, suite: &SuiteOutcome, title: &str) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("config.toml"), config.to_toml()?)?;
    emit_report(&suite.table, out, title)?;
    let mut members = String::from("condition,split,member,strategy,seed,accuracy\n");
    let mut splits = String::from("condition,split,sha256\n");
    for c in &suite.conditions {
        let cdir = out.join("confusion").join(&c.condition);
        std::fs::create_dir_all(&cdir)?;
        for s in &c.splits {
            writeln!(splits, "{},{},{}", c.condition, s.split, s.digest).unwrap();
            std::fs::write(cdir.join(format!("{}_ensemble.csv", s.split)), s.confusion.to_csv())?;
            for (i, ((strategy, seed, acc), conf)) in s.members.iter().zip(&s.member_confusions).enumerate() {
                writeln!(members, "{},{},{i},{strategy},{seed},{acc:.2}", c.condition, s.split).unwrap();
                std::fs::write(cdir.join(format!("{}_member{i}_{strategy}.csv", s.split)), conf.to_csv())?;
            }
        }
    }
    std::fs::write(out.join("members.csv"), members)?;
    std::fs::write(out.join("splits.csv"), splits)?;
    std::fs::write(out.join("runtime.txt"), format!("{:.3}\n", suite.table.runtime_secs))?;
    Ok(())
}

fn finish(
    config: &ExperimentConfig,
    conditions: Vec<ConditionOutcome>,
    samples: usize,
    started: Instant,
    out: &Path,
    title: &str,
) -> Result<SuiteOutcome, HarnessError> {
    let suite = SuiteOutcome {
        table: MetricsTable {
            rows: conditions.iter().map(ConditionOutcome::row).collect(),
            runtime_secs: started.elapsed().as_secs_f64(),
            samples,
        },
        conditions,
    };
    write_suite(out, config, &suite, title)?;
    Ok(suite)
}

fn condition_name(strategies: &[FoldStrategy], combiner: Combiner) -> String {
    if strategies.len() == 1 {
        return strategies[0].table_name().to_string();
    }
    let mut sorted = strategies.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted == FoldStrategy::FOLDED {
        format!("Ourfold_{combiner}")
    } else {
        let names: Vec<&str> = strategies.iter().map(|s| s.as_str()).collect();
        format!("{}_{combiner}", names.join("+"))
    }
}

/// The configured ensemble over every split.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SuiteOutcome, HarnessError> {
    let started = Instant::now();
    let ws = Workspace::new(config, config.interp)?;
    let strategies = &config.ensemble.strategies;
    let views = ws.views(strategies)?;
    let name = condition_name(strategies, config.ensemble.combiner);
    let outcome = ws.run_condition(&name, &views, strategies, config.ensemble.combiner)?;
    finish(config, vec![outcome], ws.prepared.samples.len(), started, &config.out, "Experiment")
}

/// One single-member run per strategy on identical data, splits and seeds.
pub fn ablate_fold(config: &ExperimentConfig, strategies: &[FoldStrategy]) -> Result<SuiteOutcome, HarnessError> {
    if strategies.is_empty() {
        return Err(HarnessError::Config("no fold strategies to compare".into()));
    }
    let started = Instant::now();
    let ws = Workspace::new(config, config.interp)?;
    let views = ws.views(strategies)?;
    let conditions = strategies
        .iter()
        .map(|&s| ws.run_condition(s.table_name(), &views, &[s], Combiner::Vote))
        .collect::<Result<Vec<_>, _>>()?;
    finish(config, conditions, ws.prepared.samples.len(), started, &config.out, "Fold strategies")
}

/// The configured ensemble under each interpolation mode.
pub fn ablate_interp(config: &ExperimentConfig, modes: &[InterpMode]) -> Result<SuiteOutcome, HarnessError> {
    if modes.is_empty() {
        return Err(HarnessError::Config("no interpolation modes to compare".into()));
    }
    let started = Instant::now();
    let strategies = &config.ensemble.strategies;
    let mut conditions = Vec::new();
    let mut samples = 0;
    for &mode in modes {
        let ws = Workspace::new(config, mode)?;
        samples = ws.prepared.samples.len();
        let views = ws.views(strategies)?;
        conditions.push(ws.run_condition(mode.as_str(), &views, strategies, config.ensemble.combiner)?);
    }
    finish(config, conditions, samples, started, &config.out, "Interpolation")
}

/// Repeated-strategy ensembles versus the five-fold ensemble, vote and
/// average.
pub fn ablate_ensemble(config: &ExperimentConfig) -> Result<SuiteOutcome, HarnessError> {
    let started = Instant::now();
    let ws = Workspace::new(config, config.interp)?;
    let views = ws.views(&FoldStrategy::ALL)?;
    let runs: [(Vec<FoldStrategy>, Combiner); 5] = [
        (vec![FoldStrategy::NoFold; ENSEMBLE_SIZE], Combiner::Vote),
        (vec![FoldStrategy::LeftOnRight; ENSEMBLE_SIZE], Combiner::Vote),
        (vec![FoldStrategy::TopOnBottom; ENSEMBLE_SIZE], Combiner::Vote),
        (FoldStrategy::FOLDED.to_vec(), Combiner::Average),
        (FoldStrategy::FOLDED.to_vec(), Combiner::Vote),
    ];
    let conditions = ENSEMBLE_CONDITIONS
        .iter()
        .zip(&runs)
        .map(|(name, (strategies, combiner))| ws.run_condition(name, &views, strategies, *combiner))
        .collect::<Result<Vec<_>, _>>()?;
    finish(config, conditions, ws.prepared.samples.len(), started, &config.out, "Ensemble strategies")
}

/// Trains the configured ensemble on the first split and saves it under
/// `<out>/model`, returning the held-out score.
pub fn train_model(config: &ExperimentConfig) -> Result<(PathBuf, SplitOutcome), HarnessError> {
    let ws = Workspace::new(config, config.interp)?;
    let split = ws.splits.first().ok_or_else(|| HarnessError::Config("no splits".into()))?;
    let strategies = &config.ensemble.strategies;
    let views = ws.views(strategies)?;
    let spec = spec_for(config, strategies, config.ensemble.combiner, ws.classes(), 0);
    let ensemble = train_sfe(&views, &split.train, &spec, &config.train)?;
    let dir = config.out.join("model");
    ensemble.save(&dir)?;
    std::fs::write(config.out.join("config.toml"), config.to_toml()?)?;
    let outcome = evaluate(&ensemble, &views, split, ws.classes())?;
    Ok((dir, outcome))
}

/// Scores a saved ensemble on the first split's test set of `config`.
pub fn eval_model(config: &ExperimentConfig, model: &Path) -> Result<SplitOutcome, HarnessError> {
    let ensemble = Ensemble::load(model)?;
    let ws = Workspace::new(config, config.interp)?;
    let split = ws.splits.first().ok_or_else(|| HarnessError::Config("no splits".into()))?;
    let strategies: Vec<FoldStrategy> = ensemble.members.iter().map(|m| m.spec.strategy).collect();
    let views = ws.views(&strategies)?;
    if ensemble.spec.classes != ws.classes() {
        return Err(HarnessError::Config(format!(
            "model predicts {} classes, task has {}",
            ensemble.spec.classes,
            ws.classes()
        )));
    }
    evaluate(&ensemble, &views, split, ws.classes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_counts() {
        let c = Confusion::new(2, &[0, 0, 1, 1], &[0, 1, 1, 1]);
        assert_eq!(c.counts, vec![vec![1, 1], vec![0, 2]]);
        assert_eq!(c.to_csv(), "truth,pred0,pred1\n0,1,1\n1,0,2\n");
    }

    #[test]
    fn condition_names() {
        assert_eq!(condition_name(&FoldStrategy::FOLDED, Combiner::Vote), "Ourfold_vote");
        assert_eq!(condition_name(&[FoldStrategy::NoFold], Combiner::Vote), "No_fold");
        assert_eq!(
            condition_name(&[FoldStrategy::LeftOnRight, FoldStrategy::TopOnBottom], Combiner::Average),
            "left+up_average"
        );
    }
}
