use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AdamConfig, Batch, Network, NnError, Real, Tensor4};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            adam: AdamConfig::default(),
        }
    }
}

/// Mini-batch Adam over shuffled samples. Returns the mean objective of
/// each epoch.
pub fn fit<F: Real>(
    net: &mut Network<F>,
    samples: &[&Tensor4<F>],
    labels: &[usize],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<f64>, NnError> {
    if samples.len() != labels.len() {
        return Err(NnError::ShapeMismatch(format!(
            "{} samples, {} labels",
            samples.len(),
            labels.len()
        )));
    }
    if samples.is_empty() || cfg.batch_size == 0 {
        return Err(NnError::ShapeMismatch("nothing to train on".into()));
    }
    let dims = net.input_dims();
    let per = dims.iter().product::<usize>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut data = Vec::with_capacity(chunk.len() * per);
            for &i in chunk {
                data.extend_from_slice(samples[i].as_slice());
            }
            let x = Batch::new(chunk.len(), dims, data)?;
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            total += net.train_step(&x, &y, &cfg.adam)?.as_f64();
            batches += 1;
        }
        history.push(total / batches as f64);
    }
    Ok(history)
}

/// Percentage of exact matches.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    100.0 * hits as f64 / truth.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{build_network, ArchConfig};

    #[test]
    fn accuracy_counts() {
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 0, 0]), 75.0);
        assert_eq!(accuracy(&[], &[]), 0.0);
    }

    #[test]
    fn training_is_bit_reproducible() {
        let arch = ArchConfig::narrow(2, 8);
        let samples: Vec<Tensor4<f32>> = (0..6)
            .map(|k| Tensor4::from_fn([1, 16, 5, 5], |[_, d, h, w]| ((k * 31 + d * 7 + h * 3 + w) as f32 * 0.1).sin()))
            .collect();
        let refs: Vec<&Tensor4<f32>> = samples.iter().collect();
        let labels = [0, 1, 0, 1, 0, 1];
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let run = || {
            let mut net = build_network::<f32>([1, 16, 5, 5], 2, &arch, 9).unwrap();
            let hist = fit(&mut net, &refs, &labels, &cfg, 9).unwrap();
            let state: Vec<Vec<f32>> = net.state_tensors().into_iter().map(|(_, v)| v.to_vec()).collect();
            (hist, state)
        };
        assert_eq!(run(), run());
    }
}
