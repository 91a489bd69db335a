use super::{ExperimentConfig, HarnessError};
use crate::data::{derive_label, normalize, remove_baseline, segment, synth_dataset, Task, Trial, TrialSet};
use crate::grid::Grid;
use crate::interp::InterpMode;
use crate::montage::Montage;

/// Windowed, grid-mapped and interpolated samples ready for folding.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    /// One frame sequence per window.
    pub samples: Vec<Vec<Grid>>,
    pub labels: Vec<usize>,
    pub subjects: Vec<String>,
    pub trial_ids: Vec<usize>,
    pub classes: usize,
}

pub fn load_trials(config: &ExperimentConfig, montage: &Montage) -> Result<TrialSet, HarnessError> {
    Ok(match &config.dataset {
        Some(path) => TrialSet::load(path)?,
        None => synth_dataset(&config.synth, montage)?,
    })
}

/// Rows of `trial` for `names`, in that order.
fn select_channels(trial: &Trial, available: &[String], names: &[String]) -> Result<Trial, HarnessError> {
    let mut data = Vec::with_capacity(names.len() * trial.samples());
    for n in names {
        let row = available
            .iter()
            .position(|a| a == n)
            .ok_or_else(|| HarnessError::Config(format!("channel {n} not present in dataset")))?;
        data.extend_from_slice(trial.row(row));
    }
    Ok(Trial::from_vec(names.len(), trial.samples(), data))
}

/// normalize -> window -> montage map -> interpolate, per trial.
pub fn prepare(
    config: &ExperimentConfig,
    montage: &Montage,
    set: &TrialSet,
    interp: InterpMode,
) -> Result<Prepared, HarnessError> {
    set.validate()?;
    let names = match &config.channels {
        Some(names) => names.clone(),
        None => set.channel_names.clone(),
    };
    let classes = match (config.task.classes(), &config.dataset) {
        (Some(c), _) => c,
        (None, None) => config.synth.classes,
        (None, Some(_)) => {
            let mut max = 0;
            for r in &set.labels {
                max = max.max(derive_label(r, Task::Synth)?);
            }
            max + 1
        }
    };
    let mut out = Prepared {
        samples: Vec::new(),
        labels: Vec::new(),
        subjects: Vec::new(),
        trial_ids: Vec::new(),
        classes,
    };
    for (t, trial) in set.trials.iter().enumerate() {
        let label = derive_label(&set.labels[t], config.task)?;
        let mut trial = select_channels(trial, &set.channel_names, &names)?;
        if let Some(b) = &config.baseline {
            trial = remove_baseline(&trial, b.baseline_seconds, b.signal_seconds, set.rate_hz)?;
        }
        let trial = normalize(&trial).trial;
        for window in segment(&trial, set.rate_hz, config.window_seconds, label, &set.subjects[t], t)? {
            let frames = montage
                .map_trial(&names, &window.window)?
                .iter()
                .map(|f| interp.apply(f, &config.interp_params).values)
                .collect();
            out.samples.push(frames);
            out.labels.push(window.label);
            out.subjects.push(window.subject_id);
            out.trial_ids.push(t);
        }
    }
    if out.samples.is_empty() {
        return Err(HarnessError::Config("no windows fit in the trials".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SynthSpec;

    #[test]
    fn synthetic_pipeline_shapes() {
        let cfg = ExperimentConfig {
            synth: SynthSpec {
                trials: 4,
                seconds: 2.0,
                rate_hz: 16.0,
                ..SynthSpec::default()
            },
            ..ExperimentConfig::default()
        };
        let montage = cfg.validate().unwrap();
        let set = load_trials(&cfg, &montage).unwrap();
        let p = prepare(&cfg, &montage, &set, InterpMode::BicubicEeg).unwrap();
        assert_eq!(p.samples.len(), 8);
        assert_eq!(p.classes, 2);
        assert!(p.samples.iter().all(|s| s.len() == 16 && s[0].shape() == (9, 9)));
        assert_eq!(p.labels, vec![0, 0, 1, 1, 0, 0, 1, 1]);
        assert_eq!(p.trial_ids, vec![0, 0, 1, 1, 2, 2, 3, 3]);
    }

    #[test]
    fn channel_subset_must_exist_in_data() {
        let cfg = ExperimentConfig {
            channels: Some(vec!["Fp1".into(), "Cz".into()]),
            synth: SynthSpec {
                trials: 2,
                seconds: 1.0,
                rate_hz: 16.0,
                ..SynthSpec::default()
            },
            ..ExperimentConfig::default()
        };
        let montage = cfg.validate().unwrap();
        assert_eq!(montage.len(), 2);
        let set = synth_dataset(&cfg.synth, &Montage::deap32()).unwrap();
        let p = prepare(&cfg, &montage, &set, InterpMode::None).unwrap();
        let frame = &p.samples[0][0];
        let nonzero = frame.as_slice().iter().filter(|v| **v != 0.0).count();
        assert!(nonzero <= 2);
    }
}
