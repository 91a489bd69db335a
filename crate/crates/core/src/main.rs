use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sfenet::data::{read_tensor, synth_dataset, DatasetMeta, SplitScheme, Task, TrialSet};
use sfenet::fold::FoldStrategy;
use sfenet::harness::{
    ablate_ensemble, ablate_fold, ablate_interp, emit_report, eval_model, run_experiment, train_model, ExperimentConfig,
    HarnessError, MetricsTable, SplitOutcome, SuiteOutcome,
};
use sfenet::interp::InterpMode;

#[derive(Parser)]
#[command(name = "sfenet", version, about = "Spatial folding ensemble network for EEG emotion recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured synthetic dataset.
    Synth(Common),
    /// Validate an EEGT dataset, apply baseline removal, and store it.
    Import {
        /// EEGT file (trials x channels x time) with a `.meta` sidecar.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train the configured ensemble on the first split and save it.
    Train(Common),
    /// Score a saved ensemble on the first split's test set.
    Eval {
        /// Directory written by `train` (contains ensemble.toml).
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Cross-validated single-member runs per fold strategy.
    AblateFold(Common),
    /// Cross-validated ensemble runs per interpolation mode.
    AblateInterp(Common),
    /// Repeated-fold versus diverse-fold ensembles.
    AblateEnsemble(Common),
    /// Re-render a metrics CSV as CSV + SVG.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "Accuracy")]
        title: String,
        #[command(flatten)]
        common: Common,
    },
    /// Full cross-validated run of the configured ensemble.
    Run(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fold strategies, comma separated: none, left, right, up, down, full.
    #[arg(long)]
    fold: Option<String>,
    /// Interpolation mode(s), comma separated: none, bilinear, bicubic-eeg.
    #[arg(long)]
    interp: Option<String>,
    /// arousal, valence, four, seed3 or synth.
    #[arg(long)]
    task: Option<String>,
    /// dep, indep or kfold.
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
}

fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>, T::Err> {
    text.split(',').map(|s| s.trim().parse()).collect()
}

impl Common {
    fn folds(&self) -> Result<Option<Vec<FoldStrategy>>, HarnessError> {
        self.fold.as_deref().map(parse_list).transpose().map_err(HarnessError::from)
    }

    fn interps(&self) -> Result<Option<Vec<InterpMode>>, HarnessError> {
        self.interp.as_deref().map(parse_list).transpose().map_err(HarnessError::from)
    }

    fn config(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(folds) = self.folds()? {
            cfg.ensemble.strategies = folds;
        }
        if let Some(modes) = self.interps()? {
            if let [mode] = modes[..] {
                cfg.interp = mode;
            }
        }
        if let Some(task) = &self.task {
            cfg.task = task.parse::<Task>()?;
        }
        if let Some(split) = &self.split {
            cfg.split.scheme = split.parse::<SplitScheme>()?;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(epochs) = self.epochs {
            cfg.train.epochs = epochs;
        }
        Ok(cfg)
    }
}

fn suite_json(command: &str, suite: &SuiteOutcome, out: &Path) -> serde_json::Value {
    let rows: Vec<_> = suite
        .table
        .rows
        .iter()
        .map(|r| json!({"condition": r.condition, "mean": r.mean, "std": r.std, "n": r.n}))
        .collect();
    json!({
        "status": "ok",
        "command": command,
        "out": out,
        "samples": suite.table.samples,
        "runtime_secs": suite.table.runtime_secs,
        "rows": rows,
    })
}

fn split_json(outcome: &SplitOutcome) -> serde_json::Value {
    let members: Vec<_> = outcome
        .members
        .iter()
        .map(|(s, seed, acc)| json!({"strategy": s.as_str(), "seed": seed, "accuracy": acc}))
        .collect();
    json!({"split": outcome.split, "accuracy": outcome.accuracy, "members": members})
}

fn run(cli: Cli) -> Result<serde_json::Value, HarnessError> {
    Ok(match cli.command {
        Command::Synth(common) => {
            let cfg = common.config()?;
            let montage = cfg.validate()?;
            let set = synth_dataset(&cfg.synth, &montage)?;
            std::fs::create_dir_all(&cfg.out)?;
            let path = cfg.out.join("synth.eegt");
            set.save(&path)?;
            json!({"status": "ok", "command": "synth", "dataset": path, "trials": set.len()})
        }
        Command::Import { input, common } => {
            let cfg = common.config()?;
            let tensor = read_tensor(&input).map_err(sfenet::data::DataError::from)?;
            let meta_path = sfenet::data::meta_path(&input);
            let text = std::fs::read_to_string(&meta_path)?;
            let meta: DatasetMeta =
                toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", meta_path.display())))?;
            let mut set = TrialSet::from_tensor(&tensor, meta)?;
            if let Some(b) = &cfg.baseline {
                set.trials = set
                    .trials
                    .iter()
                    .map(|t| sfenet::data::remove_baseline(t, b.baseline_seconds, b.signal_seconds, set.rate_hz))
                    .collect::<Result<_, _>>()?;
            }
            std::fs::create_dir_all(&cfg.out)?;
            let path = cfg.out.join("dataset.eegt");
            set.save(&path)?;
            json!({"status": "ok", "command": "import", "dataset": path, "trials": set.len()})
        }
        Command::Train(common) => {
            let cfg = common.config()?;
            let (model, outcome) = train_model(&cfg)?;
            json!({"status": "ok", "command": "train", "model": model, "holdout": split_json(&outcome)})
        }
        Command::Eval { model, common } => {
            let cfg = common.config()?;
            let outcome = eval_model(&cfg, &model)?;
            json!({"status": "ok", "command": "eval", "model": model, "holdout": split_json(&outcome)})
        }
        Command::Run(common) => {
            let cfg = common.config()?;
            suite_json("run", &run_experiment(&cfg)?, &cfg.out)
        }
        Command::AblateFold(common) => {
            let cfg = common.config()?;
            let strategies = common.folds()?.unwrap_or_else(|| FoldStrategy::ALL.to_vec());
            suite_json("ablate-fold", &ablate_fold(&cfg, &strategies)?, &cfg.out)
        }
        Command::AblateInterp(common) => {
            let cfg = common.config()?;
            let modes = common.interps()?.unwrap_or_else(|| InterpMode::ALL.to_vec());
            suite_json("ablate-interp", &ablate_interp(&cfg, &modes)?, &cfg.out)
        }
        Command::AblateEnsemble(common) => {
            let cfg = common.config()?;
            suite_json("ablate-ensemble", &ablate_ensemble(&cfg)?, &cfg.out)
        }
        Command::Report { input, title, common } => {
            let text = std::fs::read_to_string(&input)?;
            let table = MetricsTable::from_csv(&text)?;
            let out = common.out.clone().unwrap_or_else(|| input.parent().map(Path::to_path_buf).unwrap_or_default());
            emit_report(&table, &out, &title)?;
            json!({"status": "ok", "command": "report", "out": out, "rows": table.rows.len()})
        }
    })
}

fn error_line(kind: &str, message: &str) -> String {
    json!({"status": "error", "kind": kind, "message": message}).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_line("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}
