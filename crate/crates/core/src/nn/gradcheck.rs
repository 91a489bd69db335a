//! Central finite-difference verification of the analytic gradients, for
//! each layer type on its own and for a whole network.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{relu, relu_backward, softmax_xent};
use super::{Batch, BatchNorm, Conv3Layer, Dense, DepthPool, Dropout, Network, NnError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub h: f64,
    pub tolerance: f64,
    /// Entries probed per tensor; smaller tensors are probed exhaustively.
    pub per_tensor: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            h: 1e-5,
            tolerance: 1e-4,
            per_tensor: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    /// Entries above tolerance.
    pub failures: Vec<Mismatch>,
}

impl GradCheckReport {
    fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            checked: 0,
            max_rel_error: 0.0,
            failures: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checked > 0 && self.failures.is_empty()
    }

    fn record(&mut self, tensor: &str, index: usize, analytic: f64, numeric: f64, tol: f64) {
        let err = relative_error(analytic, numeric);
        self.checked += 1;
        self.max_rel_error = self.max_rel_error.max(err);
        if !(err <= tol) {
            self.failures.push(Mismatch {
                tensor: tensor.to_string(),
                index,
                analytic,
                numeric,
                rel_error: err,
            });
        }
    }
}

/// `|a - n| / max(|a|, |n|, 1e-6)`; the floor keeps gradients that are
/// zero up to round-off from reporting huge relative errors.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn probe_indices(len: usize, cfg: &GradCheckConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if len <= cfg.per_tensor {
        (0..len).collect()
    } else {
        let mut idx = sample(rng, len, cfg.per_tensor).into_vec();
        idx.sort_unstable();
        idx
    }
}

/// Compares `analytic` against central differences of `loss` around
/// `base` on a random subset of entries.
fn probe(
    report: &mut GradCheckReport,
    tensor: &str,
    base: &[f64],
    analytic: &[f64],
    cfg: &GradCheckConfig,
    rng: &mut ChaCha8Rng,
    mut loss: impl FnMut(&[f64]) -> f64,
) {
    let mut x = base.to_vec();
    for i in probe_indices(base.len(), cfg, rng) {
        x[i] = base[i] + cfg.h;
        let up = loss(&x);
        x[i] = base[i] - cfg.h;
        let down = loss(&x);
        x[i] = base[i];
        report.record(tensor, i, analytic[i], (up - down) / (2.0 * cfg.h), cfg.tolerance);
    }
}

/// Train-mode objective of the network: batch-mean cross-entropy plus
/// weight decay.
fn objective(net: &mut Network<f64>, x: &Batch<f64>, labels: &[usize]) -> Result<f64, NnError> {
    let logits = net.forward(x)?;
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        total += softmax_xent(logits.sample(i), y)?.0;
    }
    Ok(total / labels.len() as f64 + net.penalty())
}

/// End-to-end check of every parameter tensor of `net` on one batch.
/// Dropout is switched off for the duration so the objective is a
/// deterministic function of the parameters.
pub fn gradient_check(
    net: &mut Network<f64>,
    x: &Batch<f64>,
    labels: &[usize],
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport, NnError> {
    net.set_dropout(false);
    let result = check_network(net, x, labels, cfg);
    net.set_dropout(true);
    result
}

fn check_network(
    net: &mut Network<f64>,
    x: &Batch<f64>,
    labels: &[usize],
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    net.zero_grads();
    net.loss_and_grad(x, labels)?;
    let analytic: Vec<Vec<f64>> = net.params().iter().map(|(_, g)| g.to_vec()).collect();
    let mut report = GradCheckReport::new("network");
    for (t, grads) in analytic.iter().enumerate() {
        let idx = probe_indices(grads.len(), cfg, &mut rng);
        for i in idx {
            let base = net.params()[t].0[i];
            let at = |v: f64, net: &mut Network<f64>| -> Result<f64, NnError> {
                net.params_mut()[t].0[i] = v;
                objective(net, x, labels)
            };
            let up = at(base + cfg.h, net)?;
            let down = at(base - cfg.h, net)?;
            at(base, net)?;
            report.record(&format!("param{t}"), i, grads[i], (up - down) / (2.0 * cfg.h), cfg.tolerance);
        }
    }
    Ok(report)
}

fn random_batch(n: usize, dims: [usize; 4], rng: &mut ChaCha8Rng) -> Batch<f64> {
    let len = n * dims.iter().product::<usize>();
    Batch::new(n, dims, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("sized")
}

fn weighted(out: &Batch<f64>, r: &Batch<f64>) -> f64 {
    out.as_slice().iter().zip(r.as_slice()).map(|(a, b)| a * b).sum()
}

fn with_data(like: &Batch<f64>, data: &[f64]) -> Batch<f64> {
    Batch::new(like.n(), like.dims(), data.to_vec()).expect("same size")
}

fn check_conv(cfg: &GradCheckConfig, rng: &mut ChaCha8Rng) -> Result<GradCheckReport, NnError> {
    let mut report = GradCheckReport::new("conv3");
    let cases: [([usize; 4], usize, [usize; 3], [usize; 3], [usize; 3]); 2] = [
        ([2, 6, 4, 5], 3, [2, 3, 3], [2, 1, 1], [0, 1, 1]),
        ([3, 4, 3, 3], 2, [3, 3, 3], [1, 1, 1], [1, 1, 1]),
    ];
    for (in_dims, maps, kernel, stride, pad) in cases {
        let mut layer = Conv3Layer::new(in_dims, maps, kernel, stride, pad, 0.01)?;
        layer.weights.iter_mut().for_each(|w| *w = rng.gen_range(-0.5..0.5));
        layer.bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
        let x = random_batch(2, in_dims, rng);
        let r = random_batch(2, layer.out_dims(), rng);
        let mut trained = layer.clone();
        trained.forward(&x)?;
        let gx = trained.backward(&r)?;
        let loss = |l: &Conv3Layer<f64>, x: &Batch<f64>| weighted(&l.infer(x).expect("shape"), &r) + l.penalty();
        probe(&mut report, "input", x.as_slice(), gx.as_slice(), cfg, rng, |d| loss(&layer, &with_data(&x, d)));
        probe(&mut report, "weights", &layer.weights, &trained.grad_w, cfg, rng, |d| {
            let mut l = layer.clone();
            l.weights = d.to_vec();
            loss(&l, &x)
        });
        probe(&mut report, "bias", &layer.bias, &trained.grad_b, cfg, rng, |d| {
            let mut l = layer.clone();
            l.bias = d.to_vec();
            loss(&l, &x)
        });
    }
    Ok(report)
}

fn check_batchnorm(cfg: &GradCheckConfig, rng: &mut ChaCha8Rng) -> Result<GradCheckReport, NnError> {
    let mut report = GradCheckReport::new("batchnorm");
    let dims = [3, 4, 2, 3];
    let mut bn = BatchNorm::<f64>::new(3, 0.1, 1e-5);
    bn.gamma.iter_mut().for_each(|g| *g = rng.gen_range(0.5..1.5));
    bn.beta.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
    let x = random_batch(2, dims, rng);
    let r = random_batch(2, dims, rng);
    let mut trained = bn.clone();
    trained.forward(&x)?;
    let gx = trained.backward(&r)?;
    let loss = |b: &BatchNorm<f64>, x: &Batch<f64>| weighted(&b.clone().forward(x).expect("shape"), &r);
    probe(&mut report, "input", x.as_slice(), gx.as_slice(), cfg, rng, |d| loss(&bn, &with_data(&x, d)));
    probe(&mut report, "gamma", &bn.gamma, &trained.grad_gamma, cfg, rng, |d| {
        let mut b = bn.clone();
        b.gamma = d.to_vec();
        loss(&b, &x)
    });
    probe(&mut report, "beta", &bn.beta, &trained.grad_beta, cfg, rng, |d| {
        let mut b = bn.clone();
        b.beta = d.to_vec();
        loss(&b, &x)
    });
    Ok(report)
}

fn check_relu(cfg: &GradCheckConfig, rng: &mut ChaCha8Rng) -> GradCheckReport {
    let mut report = GradCheckReport::new("relu");
    let dims = [2, 3, 3, 3];
    let mut x = random_batch(2, dims, rng);
    // Keep inputs away from the kink.
    x.as_mut_slice().iter_mut().for_each(|v| {
        if v.abs() < 0.05 {
            *v += 0.1
        }
    });
    let r = random_batch(2, dims, rng);
    let gx = relu_backward(&r, &x);
    probe(&mut report, "input", x.as_slice(), gx.as_slice(), cfg, rng, |d| weighted(&relu(&with_data(&x, d)), &r));
    report
}

fn check_pool(cfg: &GradCheckConfig, rng: &mut ChaCha8Rng) -> Result<GradCheckReport, NnError> {
    let mut report = GradCheckReport::new("maxpool");
    let dims = [2, 5, 2, 3];
    let x = random_batch(2, dims, rng);
    let mut pool = DepthPool::new(2);
    let r = random_batch(2, pool.out_dims(dims), rng);
    pool.forward(&x)?;
    let gx = pool.backward(&r)?;
    probe(&mut report, "input", x.as_slice(), gx.as_slice(), cfg, rng, |d| {
        weighted(&pool.infer(&with_data(&x, d)).expect("shape"), &r)
    });
    Ok(report)
}

fn check_dense(cfg: &GradCheckConfig, rng: &mut ChaCha8Rng) -> Result<GradCheckReport, NnError> {
    let mut report = GradCheckReport::new("dense");
    let mut dense = Dense::<f64>::new(12, 5);
    dense.weights.iter_mut().for_each(|w| *w = rng.gen_range(-0.5..0.5));
    dense.bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
    let x = random_batch(3, [12, 1, 1, 1], rng);
    let r = random_batch(3, [5, 1, 1, 1], rng);
    let mut trained = dense.clone();
    trained.forward(&x)?;
    let gx = trained.backward(&r)?;
    let loss = |l: &Dense<f64>, x: &Batch<f64>| weighted(&l.infer(x).expect("shape"), &r);
    probe(&mut report, "input", x.as_slice(), gx.as_slice(), cfg, rng, |d| loss(&dense, &with_data(&x, d)));
    probe(&mut report, "weights", &dense.weights, &trained.grad_w, cfg, rng, |d| {
        let mut l = dense.clone();
        l.weights = d.to_vec();
        loss(&l, &x)
    });
    probe(&mut report, "bias", &dense.bias, &trained.grad_b, cfg, rng, |d| {
        let mut l = dense.clone();
        l.bias = d.to_vec();
        loss(&l, &x)
    });
    Ok(report)
}

/// Dropout with a frozen mask: every evaluation replays the same RNG state.
fn check_dropout(cfg: &GradCheckConfig, rng: &mut ChaCha8Rng) -> Result<GradCheckReport, NnError> {
    let mut report = GradCheckReport::new("dropout");
    let dims = [20, 1, 1, 1];
    let x = random_batch(2, dims, rng);
    let r = random_batch(2, dims, rng);
    let mask_rng = ChaCha8Rng::seed_from_u64(rng.gen());
    let mut drop = Dropout::new(0.5);
    drop.forward(&x, &mut mask_rng.clone());
    let gx = drop.backward(&r)?;
    probe(&mut report, "input", x.as_slice(), gx.as_slice(), cfg, rng, |d| {
        weighted(&Dropout::new(0.5).forward(&with_data(&x, d), &mut mask_rng.clone()), &r)
    });
    Ok(report)
}

fn check_softmax(cfg: &GradCheckConfig, rng: &mut ChaCha8Rng) -> Result<GradCheckReport, NnError> {
    let mut report = GradCheckReport::new("softmax_xent");
    for classes in [2, 3, 5] {
        let logits: Vec<f64> = (0..classes).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let label = rng.gen_range(0..classes);
        let (_, grad) = softmax_xent(&logits, label)?;
        probe(&mut report, "logits", &logits, &grad, cfg, rng, |d| softmax_xent(d, label).expect("label").0);
    }
    Ok(report)
}

/// Checks every layer type in isolation against the scalar loss
/// `sum(r * layer(x))` (plus weight decay for convolutions) with random `r`.
pub fn check_layers(cfg: &GradCheckConfig) -> Result<Vec<GradCheckReport>, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(vec![
        check_conv(cfg, &mut rng)?,
        check_batchnorm(cfg, &mut rng)?,
        check_relu(cfg, &mut rng),
        check_pool(cfg, &mut rng)?,
        check_dense(cfg, &mut rng)?,
        check_dropout(cfg, &mut rng)?,
        check_softmax(cfg, &mut rng)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{build_network, ArchConfig, Layer};

    pub(crate) fn tiny() -> (Network<f64>, Batch<f64>, Vec<usize>) {
        let net = build_network::<f64>([1, 8, 5, 5], 2, &ArchConfig::tiny(), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_batch(3, [1, 8, 5, 5], &mut rng);
        (net, x, vec![0, 1, 1])
    }

    #[test]
    fn every_layer_passes() {
        for report in check_layers(&GradCheckConfig::default()).unwrap() {
            assert!(report.passed(), "{report:?}");
        }
    }

    #[test]
    fn tiny_network_passes() {
        let (mut net, x, y) = tiny();
        let report = gradient_check(&mut net, &x, &y, &GradCheckConfig::default()).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn sign_flipped_conv_backward_fails() {
        let (mut net, x, y) = tiny();
        for layer in net.layers_mut() {
            if let Layer::Conv(c) = layer {
                c.corrupt_backward();
                break;
            }
        }
        let report = gradient_check(&mut net, &x, &y, &GradCheckConfig::default()).unwrap();
        assert!(!report.passed());
        assert!(report.failures.iter().all(|f| f.tensor == "param0"));
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!(relative_error(1e-12, -1e-12) < 1e-5);
    }
}
