use super::{DataError, Trial};

/// Converts a duration to a whole number of samples.
pub(crate) fn seconds_to_samples(seconds: f64, rate_hz: f64) -> Result<usize, DataError> {
    let n = seconds * rate_hz;
    let rounded = n.round();
    if !(rounded >= 1.0) || (n - rounded).abs() > 1e-9 * n.abs().max(1.0) {
        return Err(DataError::BadWindow(format!(
            "{seconds} s at {rate_hz} Hz is not a positive whole number of samples"
        )));
    }
    Ok(rounded as usize)
}

/// Subtracts the per-channel mean of the leading baseline segment from the
/// signal segment and drops the baseline.
pub fn remove_baseline(
    trial: &Trial,
    baseline_seconds: f64,
    signal_seconds: f64,
    rate_hz: f64,
) -> Result<Trial, DataError> {
    let base = seconds_to_samples(baseline_seconds, rate_hz)?;
    let signal = seconds_to_samples(signal_seconds, rate_hz)?;
    if trial.samples() != base + signal {
        return Err(DataError::LengthMismatch {
            expected: base + signal,
            got: trial.samples(),
        });
    }
    let mut data = Vec::with_capacity(trial.channels() * signal);
    for ch in 0..trial.channels() {
        let row = trial.row(ch);
        let mean = row[..base].iter().sum::<f64>() / base as f64;
        data.extend(row[base..].iter().map(|v| v - mean));
    }
    Ok(Trial::from_vec(trial.channels(), signal, data))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub trial: Trial,
    /// Channels with zero variance; these are centered but not scaled.
    pub zero_variance: Vec<usize>,
}

/// Per-channel z-score over the whole trial (population variance).
pub fn normalize(trial: &Trial) -> Normalized {
    let mut out = trial.clone();
    let mut zero_variance = Vec::new();
    let n = trial.samples() as f64;
    for ch in 0..trial.channels() {
        let row = out.row_mut(ch);
        if row.is_empty() {
            continue;
        }
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd > 0.0 && sd.is_finite() {
            row.iter_mut().for_each(|v| *v = (*v - mean) / sd);
        } else {
            zero_variance.push(ch);
            row.iter_mut().for_each(|v| *v -= mean);
        }
    }
    Normalized {
        trial: out,
        zero_variance,
    }
}

/// One fixed-length window cut from a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub window: Trial,
    pub label: usize,
    pub subject_id: String,
    pub trial_id: usize,
    pub window_id: usize,
}

/// Cuts non-overlapping windows; a trailing partial window is dropped.
pub fn segment(
    trial: &Trial,
    rate_hz: f64,
    window_seconds: f64,
    label: usize,
    subject_id: &str,
    trial_id: usize,
) -> Result<Vec<Sample>, DataError> {
    let len = seconds_to_samples(window_seconds, rate_hz)?;
    let count = trial.samples() / len;
    Ok((0..count)
        .map(|w| Sample {
            window: trial.columns(w * len, (w + 1) * len),
            label,
            subject_id: subject_id.to_string(),
            trial_id,
            window_id: w,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_trial_baseline_removed_to_zero() {
        let t = Trial::from_vec(2, 8064, vec![5.0; 2 * 8064]);
        let out = remove_baseline(&t, 3.0, 60.0, 128.0).unwrap();
        assert_eq!(out.samples(), 7680);
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn baseline_matches_naive_loop() {
        let samples = 63 * 4;
        let data: Vec<f64> = (0..3 * samples).map(|i| ((i * 37) % 101) as f64 * 0.1 - 3.0).collect();
        let t = Trial::from_vec(3, samples, data);
        let out = remove_baseline(&t, 3.0, 60.0, 4.0).unwrap();
        for ch in 0..3 {
            let mut mean = 0.0;
            for s in 0..12 {
                mean += t.get(ch, s);
            }
            mean /= 12.0;
            for s in 0..240 {
                assert_eq!(out.get(ch, s), t.get(ch, s + 12) - mean);
            }
        }
    }

    #[test]
    fn wrong_length_rejected() {
        let t = Trial::zeros(1, 8000);
        assert!(matches!(
            remove_baseline(&t, 3.0, 60.0, 128.0),
            Err(DataError::LengthMismatch { expected: 8064, got: 8000 })
        ));
    }

    #[test]
    fn z_score_moments() {
        let data: Vec<f64> = (0..2 * 500).map(|i| (i as f64 * 0.37).sin() * 40.0 + 7.0).collect();
        let n = normalize(&Trial::from_vec(2, 500, data));
        assert!(n.zero_variance.is_empty());
        for ch in 0..2 {
            let row = n.trial.row(ch);
            let mean = row.iter().sum::<f64>() / 500.0;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 500.0;
            assert!(mean.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_variance_flagged() {
        let mut data = vec![3.0; 10];
        data.extend((0..10).map(|i| i as f64));
        let n = normalize(&Trial::from_vec(2, 10, data));
        assert_eq!(n.zero_variance, vec![0]);
        assert!(n.trial.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn window_counts() {
        let deap = Trial::zeros(1, 7680);
        assert_eq!(segment(&deap, 128.0, 1.0, 0, "s", 0).unwrap().len(), 60);
        let s = segment(&deap, 128.0, 1.0, 1, "s", 3).unwrap();
        assert!(s.iter().all(|w| w.window.samples() == 128 && w.label == 1 && w.trial_id == 3));
        let seed = Trial::zeros(1, 12000);
        assert_eq!(segment(&seed, 200.0, 1.0, 0, "s", 0).unwrap().len(), 60);
        assert_eq!(segment(&deap, 128.0, 7.0, 0, "s", 0).unwrap().len(), 8);
        assert!(segment(&deap, 128.0, 0.0, 0, "s", 0).is_err());
    }

    #[test]
    fn windows_are_contiguous_slices() {
        let t = Trial::from_vec(1, 10, (0..10).map(|i| i as f64).collect());
        let s = segment(&t, 2.0, 2.0, 0, "s", 0).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].window.as_slice(), &[4.0, 5.0, 6.0, 7.0]);
    }
}
