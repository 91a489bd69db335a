use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layers::{relu, relu_backward, softmax, softmax_xent};
use super::{adam_step, AdamConfig, AdamState, Batch, BatchNorm, Conv3Layer, Dense, DepthPool, Dropout, NnError, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub maps: usize,
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub pad: [usize; 3],
    /// Follow BN + ReLU with a 2x1x1 max-pool.
    pub pool_after: bool,
}

/// Layer sizes and regularization of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    pub convs: Vec<ConvSpec>,
    pub pool_size: usize,
    pub dense_units: usize,
    pub dropout: f64,
    /// Weight decay on convolution kernels only.
    pub l2: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        let cube = |maps| ConvSpec {
            maps,
            kernel: [3, 3, 3],
            stride: [1, 1, 1],
            pad: [1, 1, 1],
            pool_after: true,
        };
        Self {
            convs: vec![
                ConvSpec {
                    maps: 8,
                    kernel: [2, 3, 3],
                    stride: [2, 1, 1],
                    pad: [0, 1, 1],
                    pool_after: false,
                },
                cube(8),
                cube(16),
                cube(32),
            ],
            pool_size: 2,
            dense_units: 512,
            dropout: 0.5,
            l2: 0.001,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
        }
    }
}

impl ArchConfig {
    /// Same layer pattern with every map count and the dense width scaled
    /// down to `maps` / `dense_units`.
    pub fn narrow(maps: usize, dense_units: usize) -> Self {
        let mut arch = Self::default();
        for c in &mut arch.convs {
            c.maps = maps;
        }
        arch.dense_units = dense_units;
        arch
    }

    /// One map per conv layer and pooling only after conv2 and conv3, so
    /// an 8-deep cube (four interleaved frames) fits.
    pub fn tiny() -> Self {
        let mut arch = Self::narrow(1, 4);
        arch.convs[3].pool_after = false;
        arch
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<F> {
    Conv(Conv3Layer<F>),
    BatchNorm(BatchNorm<F>),
    Relu(Option<Batch<F>>),
    Pool(DepthPool),
    Flatten([usize; 4]),
    Dense(Dense<F>),
    Dropout(Dropout),
}

impl<F: Real> Layer<F> {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::BatchNorm(_) => "batchnorm",
            Layer::Relu(_) => "relu",
            Layer::Pool(_) => "maxpool",
            Layer::Flatten(_) => "flatten",
            Layer::Dense(_) => "dense",
            Layer::Dropout(_) => "dropout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone)]
pub struct Network<F> {
    layers: Vec<Layer<F>>,
    input_dims: [usize; 4],
    classes: usize,
    arch: ArchConfig,
    seed: u64,
    adam: Vec<AdamState<F>>,
    rng: ChaCha8Rng,
    dropout_enabled: bool,
}

fn he_init<F: Real>(values: &mut [F], fan_in: usize, rng: &mut ChaCha8Rng) {
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
    for v in values {
        *v = F::of(normal.sample(rng));
    }
}

/// Builds the layer stack for samples of `input_dims` (maps x depth x
/// height x width) with He-normal weights drawn from `seed`.
pub fn build_network<F: Real>(
    input_dims: [usize; 4],
    classes: usize,
    arch: &ArchConfig,
    seed: u64,
) -> Result<Network<F>, NnError> {
    if classes < 2 {
        return Err(NnError::ShapeMismatch(format!("{classes} classes")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut dims = input_dims;
    let too_small = |dims: [usize; 4], stage: &str| {
        NnError::InputTooSmall(format!(
            "input {input_dims:?} shrinks to {dims:?} at {stage}"
        ))
    };
    for (i, spec) in arch.convs.iter().enumerate() {
        for a in 0..3 {
            if dims[a + 1] + 2 * spec.pad[a] < spec.kernel[a] {
                return Err(too_small(dims, &format!("conv{}", i + 1)));
            }
        }
        let mut conv = Conv3Layer::new(dims, spec.maps, spec.kernel, spec.stride, spec.pad, F::of(arch.l2))?;
        he_init(&mut conv.weights, dims[0] * spec.kernel.iter().product::<usize>(), &mut rng);
        dims = conv.out_dims();
        layers.push(Layer::Conv(conv));
        layers.push(Layer::BatchNorm(BatchNorm::new(
            spec.maps,
            F::of(arch.bn_momentum),
            F::of(arch.bn_eps),
        )));
        layers.push(Layer::Relu(None));
        if spec.pool_after {
            let pool = DepthPool::new(arch.pool_size);
            let next = pool.out_dims(dims);
            if next[1] == 0 {
                return Err(too_small(dims, &format!("pool after conv{}", i + 1)));
            }
            dims = next;
            layers.push(Layer::Pool(pool));
        }
    }
    let flat: usize = dims.iter().product();
    layers.push(Layer::Flatten(dims));
    let mut hidden = Dense::new(flat, arch.dense_units);
    he_init(&mut hidden.weights, flat, &mut rng);
    layers.push(Layer::Dense(hidden));
    layers.push(Layer::Relu(None));
    layers.push(Layer::Dropout(Dropout::new(arch.dropout)));
    let mut out = Dense::new(arch.dense_units, classes);
    he_init(&mut out.weights, arch.dense_units, &mut rng);
    layers.push(Layer::Dense(out));

    let mut net = Network {
        layers,
        input_dims,
        classes,
        arch: arch.clone(),
        seed,
        adam: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(seed ^ 0xD509_F00D),
        dropout_enabled: true,
    };
    net.adam = net.params().iter().map(|(p, _)| AdamState::new(p.len())).collect();
    Ok(net)
}

impl<F: Real> Network<F> {
    pub fn layers(&self) -> &[Layer<F>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<F>] {
        &mut self.layers
    }

    pub fn input_dims(&self) -> [usize; 4] {
        self.input_dims
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn adam_states(&self) -> &[AdamState<F>] {
        &self.adam
    }

    /// With dropout disabled, train-mode forward is deterministic.
    pub fn set_dropout(&mut self, enabled: bool) {
        self.dropout_enabled = enabled;
    }

    /// `(values, gradients)` of every trainable tensor in layer order.
    pub fn params(&self) -> Vec<(&[F], &[F])> {
        let mut out: Vec<(&[F], &[F])> = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push((&c.weights, &c.grad_w));
                    out.push((&c.bias, &c.grad_b));
                }
                Layer::BatchNorm(b) => {
                    out.push((&b.gamma, &b.grad_gamma));
                    out.push((&b.beta, &b.grad_beta));
                }
                Layer::Dense(d) => {
                    out.push((&d.weights, &d.grad_w));
                    out.push((&d.bias, &d.grad_b));
                }
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<(&mut [F], &mut [F])> {
        let mut out: Vec<(&mut [F], &mut [F])> = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push((&mut c.weights, &mut c.grad_w));
                    out.push((&mut c.bias, &mut c.grad_b));
                }
                Layer::BatchNorm(b) => {
                    out.push((&mut b.gamma, &mut b.grad_gamma));
                    out.push((&mut b.beta, &mut b.grad_beta));
                }
                Layer::Dense(d) => {
                    out.push((&mut d.weights, &mut d.grad_w));
                    out.push((&mut d.bias, &mut d.grad_b));
                }
                _ => {}
            }
        }
        out
    }

    /// Labelled `(name, values)` of everything a checkpoint must restore:
    /// parameters plus batch-norm running statistics.
    pub fn state_tensors(&self) -> Vec<(String, &[F])> {
        let mut out: Vec<(String, &[F])> = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv(c) => {
                    out.push((format!("{i:02}_conv_weights"), &c.weights));
                    out.push((format!("{i:02}_conv_bias"), &c.bias));
                }
                Layer::BatchNorm(b) => {
                    out.push((format!("{i:02}_bn_gamma"), &b.gamma));
                    out.push((format!("{i:02}_bn_beta"), &b.beta));
                    out.push((format!("{i:02}_bn_running_mean"), &b.running_mean));
                    out.push((format!("{i:02}_bn_running_var"), &b.running_var));
                }
                Layer::Dense(d) => {
                    out.push((format!("{i:02}_dense_weights"), &d.weights));
                    out.push((format!("{i:02}_dense_bias"), &d.bias));
                }
                _ => {}
            }
        }
        out
    }

    pub(crate) fn state_tensors_mut(&mut self) -> Vec<&mut Vec<F>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => {
                    out.push(&mut c.weights);
                    out.push(&mut c.bias);
                }
                Layer::BatchNorm(b) => {
                    out.push(&mut b.gamma);
                    out.push(&mut b.beta);
                    out.push(&mut b.running_mean);
                    out.push(&mut b.running_var);
                }
                Layer::Dense(d) => {
                    out.push(&mut d.weights);
                    out.push(&mut d.bias);
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(p, _)| p.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for (_, g) in self.params_mut() {
            g.fill(F::zero());
        }
    }

    fn check_input(&self, x: &Batch<F>) -> Result<(), NnError> {
        if x.dims() != self.input_dims {
            return Err(NnError::ShapeMismatch(format!(
                "network expects {:?}, got {:?}",
                self.input_dims,
                x.dims()
            )));
        }
        Ok(())
    }

    /// Eval-mode logits; does not touch any cache.
    pub fn infer(&self, x: &Batch<F>) -> Result<Batch<F>, NnError> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            h = match layer {
                Layer::Conv(c) => c.infer(&h)?,
                Layer::BatchNorm(b) => b.infer(&h)?,
                Layer::Relu(_) => relu(&h),
                Layer::Pool(p) => p.infer(&h)?,
                Layer::Flatten(_) => {
                    let len = h.sample_len();
                    h.reshape([len, 1, 1, 1])?
                }
                Layer::Dense(d) => d.infer(&h)?,
                Layer::Dropout(_) => h,
            };
        }
        Ok(h)
    }

    /// Train-mode logits, caching what backward needs.
    pub fn forward(&mut self, x: &Batch<F>) -> Result<Batch<F>, NnError> {
        self.check_input(x)?;
        let mut h = x.clone();
        let dropout_enabled = self.dropout_enabled;
        for layer in &mut self.layers {
            h = match layer {
                Layer::Conv(c) => c.forward(&h)?,
                Layer::BatchNorm(b) => b.forward(&h)?,
                Layer::Relu(cache) => {
                    let out = relu(&h);
                    *cache = Some(h);
                    out
                }
                Layer::Pool(p) => p.forward(&h)?,
                Layer::Flatten(_) => {
                    let len = h.sample_len();
                    h.reshape([len, 1, 1, 1])?
                }
                Layer::Dense(d) => d.forward(&h)?,
                Layer::Dropout(d) if dropout_enabled && d.rate > 0.0 => d.forward(&h, &mut self.rng),
                Layer::Dropout(_) => h,
            };
        }
        Ok(h)
    }

    /// Backpropagates `grad` (d loss / d logits) and accumulates
    /// parameter gradients.
    pub fn backward(&mut self, grad: &Batch<F>) -> Result<Batch<F>, NnError> {
        let dropout_enabled = self.dropout_enabled;
        let mut g = grad.clone();
        for layer in self.layers.iter_mut().rev() {
            g = match layer {
                Layer::Conv(c) => c.backward(&g)?,
                Layer::BatchNorm(b) => b.backward(&g)?,
                Layer::Relu(cache) => {
                    let input = cache
                        .take()
                        .ok_or_else(|| NnError::State("relu backward without forward".into()))?;
                    relu_backward(&g, &input)
                }
                Layer::Pool(p) => p.backward(&g)?,
                Layer::Flatten(dims) => g.reshape(*dims)?,
                Layer::Dense(d) => d.backward(&g)?,
                Layer::Dropout(d) if dropout_enabled && d.rate > 0.0 => d.backward(&g)?,
                Layer::Dropout(_) => g,
            };
        }
        Ok(g)
    }

    /// Weight-decay term `sum_l l2 * ||W_l||^2` over conv kernels.
    pub fn penalty(&self) -> F {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Conv(c) => c.penalty(),
                _ => F::zero(),
            })
            .sum()
    }

    fn check_labels(&self, x: &Batch<F>, labels: &[usize]) -> Result<(), NnError> {
        if labels.len() != x.n() {
            return Err(NnError::ShapeMismatch(format!(
                "{} labels for {} samples",
                labels.len(),
                x.n()
            )));
        }
        Ok(())
    }

    /// Train-mode forward + backward of the batch-mean cross-entropy plus
    /// weight decay. Gradients accumulate; returns the objective.
    pub fn loss_and_grad(&mut self, x: &Batch<F>, labels: &[usize]) -> Result<F, NnError> {
        self.check_labels(x, labels)?;
        let logits = self.forward(x)?;
        let n = F::of(x.n() as f64);
        let mut grad = Batch::zeros(x.n(), logits.dims());
        let mut total = F::zero();
        for (i, &y) in labels.iter().enumerate() {
            let (loss, g) = softmax_xent(logits.sample(i), y)?;
            total += loss;
            for (o, gv) in grad.sample_mut(i).iter_mut().zip(g) {
                *o = gv / n;
            }
        }
        self.backward(&grad)?;
        Ok(total / n + self.penalty())
    }

    /// Zeroes gradients, backpropagates one batch and applies Adam.
    /// Returns the objective before the update.
    pub fn train_step(&mut self, x: &Batch<F>, labels: &[usize], cfg: &AdamConfig) -> Result<F, NnError> {
        self.zero_grads();
        let loss = self.loss_and_grad(x, labels)?;
        let mut states = std::mem::take(&mut self.adam);
        let result = self
            .params_mut()
            .into_iter()
            .zip(states.iter_mut())
            .try_for_each(|((p, g), s)| adam_step(p, g, s, cfg));
        self.adam = states;
        result?;
        Ok(loss)
    }

    /// Eval-mode batch-mean cross-entropy (no weight decay).
    pub fn eval_loss(&self, x: &Batch<F>, labels: &[usize]) -> Result<F, NnError> {
        self.check_labels(x, labels)?;
        let logits = self.infer(x)?;
        let mut total = F::zero();
        for (i, &y) in labels.iter().enumerate() {
            total += softmax_xent(logits.sample(i), y)?.0;
        }
        Ok(total / F::of(x.n() as f64))
    }

    /// Eval-mode class probabilities, one row per sample.
    pub fn predict_proba(&self, x: &Batch<F>) -> Result<Vec<Vec<f64>>, NnError> {
        let logits = self.infer(x)?;
        Ok((0..x.n())
            .map(|i| softmax(logits.sample(i)).into_iter().map(Real::as_f64).collect())
            .collect())
    }
}
