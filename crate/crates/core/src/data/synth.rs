//! Class-conditional synthetic EEG.
//!
//! Every channel carries a background rhythm with a random phase. Each class
//! owns a disjoint set of left/right mirror electrode pairs; in a trial of
//! that class both electrodes of each owned pair carry an extra sinusoid
//! with a shared phase. White noise is added at the requested SNR, measured
//! against the class sinusoid power.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{preprocess::seconds_to_samples, DataError, LabelRecord, Trial, TrialSet};
use crate::montage::Montage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub classes: usize,
    pub subjects: usize,
    /// Trials per subject; classes cycle through trials.
    pub trials: usize,
    pub rate_hz: f64,
    pub seconds: f64,
    /// `None` means noiseless.
    pub snr_db: Option<f64>,
    pub signal_hz: f64,
    pub signal_amplitude: f64,
    pub background_hz: f64,
    pub background_amplitude: f64,
    /// Mirror pairs assigned to each class.
    pub pairs_per_class: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: 2,
            subjects: 1,
            trials: 8,
            rate_hz: 128.0,
            seconds: 4.0,
            snr_db: Some(0.0),
            signal_hz: 8.0,
            signal_amplitude: 1.0,
            background_hz: 4.0,
            background_amplitude: 1.0,
            pairs_per_class: 3,
            seed: 7,
        }
    }
}

/// Left/right mirror electrode pairs of a montage, in row-major order of the
/// left electrode.
pub fn mirror_pairs(montage: &Montage) -> Vec<(usize, usize)> {
    let w = montage.width();
    let placements = montage.placements();
    let mut pairs = Vec::new();
    for (i, (_, (r, c))) in placements.iter().enumerate() {
        if 2 * c + 1 >= w {
            continue;
        }
        let mirror = (*r, w - 1 - c);
        if let Some(j) = placements.iter().position(|(_, cell)| *cell == mirror) {
            pairs.push(((*r, *c), i, j));
        }
    }
    pairs.sort_by_key(|&(cell, _, _)| cell);
    pairs.into_iter().map(|(_, i, j)| (i, j)).collect()
}

/// Electrode indices owned by each class. Pairs are split into contiguous
/// chunks so each class covers one scalp region.
pub fn class_electrodes(montage: &Montage, classes: usize, pairs_per_class: usize) -> Vec<Vec<usize>> {
    let pairs = mirror_pairs(montage);
    let chunk = (pairs.len() / classes.max(1)).max(1);
    (0..classes)
        .map(|c| {
            pairs
                .iter()
                .skip(c * chunk)
                .take(chunk.min(pairs_per_class))
                .flat_map(|&(i, j)| [i, j])
                .collect()
        })
        .collect()
}

pub fn synth_dataset(spec: &SynthSpec, montage: &Montage) -> Result<TrialSet, DataError> {
    if spec.classes < 2 {
        return Err(DataError::TooFewSamples(format!("{} class(es)", spec.classes)));
    }
    let owned = class_electrodes(montage, spec.classes, spec.pairs_per_class);
    if owned.iter().any(Vec::is_empty) {
        return Err(DataError::TooFewSamples(format!(
            "montage {} has too few mirror pairs for {} classes",
            montage.name(),
            spec.classes
        )));
    }
    let samples = seconds_to_samples(spec.seconds, spec.rate_hz)?;
    let channels = montage.len();
    let noise = spec.snr_db.map(|snr| {
        let signal_power = spec.signal_amplitude * spec.signal_amplitude / 2.0;
        let sd = (signal_power / 10f64.powf(snr / 10.0)).sqrt();
        Normal::new(0.0, sd).expect("finite noise level")
    });

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut trials = Vec::new();
    let mut labels = Vec::new();
    let mut subjects = Vec::new();
    let dt = 1.0 / spec.rate_hz;

    for s in 0..spec.subjects {
        for t in 0..spec.trials {
            let class = t % spec.classes;
            let class_phase = rng.gen_range(0.0..2.0 * PI);
            let mut data = Vec::with_capacity(channels * samples);
            for ch in 0..channels {
                let bg_phase = rng.gen_range(0.0..2.0 * PI);
                let active = owned[class].contains(&ch);
                for k in 0..samples {
                    let time = k as f64 * dt;
                    let mut v = spec.background_amplitude
                        * (2.0 * PI * spec.background_hz * time + bg_phase).sin();
                    if active {
                        v += spec.signal_amplitude * (2.0 * PI * spec.signal_hz * time + class_phase).sin();
                    }
                    if let Some(n) = &noise {
                        v += n.sample(&mut rng);
                    }
                    data.push(v);
                }
            }
            trials.push(Trial::from_vec(channels, samples, data));
            labels.push(LabelRecord::Synthetic { class });
            subjects.push(format!("s{:02}", s + 1));
        }
    }

    Ok(TrialSet {
        trials,
        channel_names: montage.electrode_names(),
        rate_hz: spec.rate_hz,
        labels,
        subjects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let spec = SynthSpec {
            classes: 2,
            subjects: 1,
            trials: 8,
            rate_hz: 128.0,
            seed: 7,
            ..Default::default()
        };
        let m = Montage::deap32();
        let a = synth_dataset(&spec, &m).unwrap();
        let b = synth_dataset(&spec, &m).unwrap();
        let bits = |s: &TrialSet| -> Vec<u64> {
            s.trials.iter().flat_map(|t| t.as_slice().iter().map(|v| v.to_bits())).collect()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.labels, b.labels);
        let c = synth_dataset(&SynthSpec { seed: 8, ..spec }, &m).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn class_subsets_are_disjoint_mirror_pairs() {
        let m = Montage::deap32();
        assert_eq!(mirror_pairs(&m).len(), 14);
        for classes in 2..=4 {
            let owned = class_electrodes(&m, classes, 3);
            for (a, sa) in owned.iter().enumerate() {
                assert!(!sa.is_empty());
                for sb in owned.iter().skip(a + 1) {
                    assert!(sa.iter().all(|e| !sb.contains(e)));
                }
                for &e in sa {
                    let (r, c) = m.placements()[e].1;
                    let mirror = m.placements().iter().position(|(_, p)| *p == (r, 8 - c)).unwrap();
                    assert!(sa.contains(&mirror));
                }
            }
        }
    }

    #[test]
    fn noiseless_signal_is_periodic() {
        let spec = SynthSpec {
            snr_db: None,
            trials: 2,
            ..Default::default()
        };
        let set = synth_dataset(&spec, &Montage::deap32()).unwrap();
        // 8 Hz and 4 Hz at 128 Hz share a 32-sample period.
        for trial in &set.trials {
            for ch in 0..trial.channels() {
                let row = trial.row(ch);
                for k in 0..row.len() - 32 {
                    assert!((row[k] - row[k + 32]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn shapes_and_labels() {
        let spec = SynthSpec {
            classes: 3,
            subjects: 2,
            trials: 6,
            seconds: 2.0,
            ..Default::default()
        };
        let set = synth_dataset(&spec, &Montage::deap32()).unwrap();
        assert_eq!(set.len(), 12);
        assert_eq!(set.trials[0].channels(), 32);
        assert_eq!(set.trials[0].samples(), 256);
        assert_eq!(set.labels[4], LabelRecord::Synthetic { class: 1 });
        assert_eq!(set.subjects[6], "s02");
        set.validate().unwrap();
    }
}
