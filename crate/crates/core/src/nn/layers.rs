//! Non-convolutional layers: batch norm, ReLU, depth max-pool, dense,
//! dropout, and the softmax cross-entropy loss.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::real::{axpy, dot};
use super::{Batch, NnError, Real};

fn take_cache<T>(cache: &mut Option<T>, layer: &str) -> Result<T, NnError> {
    cache
        .take()
        .ok_or_else(|| NnError::State(format!("{layer} backward without forward")))
}

/// Per-map batch normalization; statistics span batch x depth x height x width.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<F> {
    pub maps: usize,
    pub gamma: Vec<F>,
    pub beta: Vec<F>,
    pub running_mean: Vec<F>,
    pub running_var: Vec<F>,
    pub momentum: F,
    pub eps: F,
    pub(crate) grad_gamma: Vec<F>,
    pub(crate) grad_beta: Vec<F>,
    cache: Option<(Batch<F>, Vec<F>)>,
}

impl<F: Real> BatchNorm<F> {
    pub fn new(maps: usize, momentum: F, eps: F) -> Self {
        Self {
            maps,
            gamma: vec![F::one(); maps],
            beta: vec![F::zero(); maps],
            running_mean: vec![F::zero(); maps],
            running_var: vec![F::one(); maps],
            momentum,
            eps,
            grad_gamma: vec![F::zero(); maps],
            grad_beta: vec![F::zero(); maps],
            cache: None,
        }
    }

    fn check(&self, x: &Batch<F>) -> Result<usize, NnError> {
        if x.dims()[0] != self.maps {
            return Err(NnError::ShapeMismatch(format!(
                "batch norm over {} maps got {:?}",
                self.maps,
                x.dims()
            )));
        }
        Ok(x.sample_len() / self.maps)
    }

    /// Eval-mode forward with running statistics.
    pub fn infer(&self, x: &Batch<F>) -> Result<Batch<F>, NnError> {
        let plane = self.check(x)?;
        let mut out = x.clone();
        for i in 0..x.n() {
            let s = out.sample_mut(i);
            for m in 0..self.maps {
                let scale = self.gamma[m] / (self.running_var[m] + self.eps).sqrt();
                let shift = self.beta[m] - self.running_mean[m] * scale;
                for v in &mut s[m * plane..(m + 1) * plane] {
                    *v = *v * scale + shift;
                }
            }
        }
        Ok(out)
    }

    /// Train-mode forward with batch statistics; updates running statistics.
    pub fn forward(&mut self, x: &Batch<F>) -> Result<Batch<F>, NnError> {
        let plane = self.check(x)?;
        let count = x.n() * plane;
        let cnt = F::of(count as f64);
        let mut xhat = x.clone();
        let mut inv_std = vec![F::zero(); self.maps];
        for m in 0..self.maps {
            let mut sum = F::zero();
            for i in 0..x.n() {
                sum += x.sample(i)[m * plane..(m + 1) * plane].iter().copied().sum::<F>();
            }
            let mean = sum / cnt;
            let mut sq = F::zero();
            for i in 0..x.n() {
                sq += x.sample(i)[m * plane..(m + 1) * plane]
                    .iter()
                    .map(|&v| (v - mean) * (v - mean))
                    .sum::<F>();
            }
            let var = sq / cnt;
            let is = F::one() / (var + self.eps).sqrt();
            inv_std[m] = is;
            for i in 0..x.n() {
                for v in &mut xhat.sample_mut(i)[m * plane..(m + 1) * plane] {
                    *v = (*v - mean) * is;
                }
            }
            let unbiased = if count > 1 {
                sq / F::of((count - 1) as f64)
            } else {
                var
            };
            let keep = F::one() - self.momentum;
            self.running_mean[m] = keep * self.running_mean[m] + self.momentum * mean;
            self.running_var[m] = keep * self.running_var[m] + self.momentum * unbiased;
        }
        let mut out = xhat.clone();
        for i in 0..out.n() {
            let s = out.sample_mut(i);
            for m in 0..self.maps {
                let (g, b) = (self.gamma[m], self.beta[m]);
                for v in &mut s[m * plane..(m + 1) * plane] {
                    *v = g * *v + b;
                }
            }
        }
        self.cache = Some((xhat, inv_std));
        Ok(out)
    }

    pub fn backward(&mut self, grad: &Batch<F>) -> Result<Batch<F>, NnError> {
        let (xhat, inv_std) = take_cache(&mut self.cache, "batch norm")?;
        let plane = self.check(grad)?;
        let cnt = F::of((grad.n() * plane) as f64);
        let mut out = Batch::zeros(grad.n(), grad.dims());
        for m in 0..self.maps {
            let range = m * plane..(m + 1) * plane;
            let mut sum_g = F::zero();
            let mut sum_gx = F::zero();
            for i in 0..grad.n() {
                for (&g, &xh) in grad.sample(i)[range.clone()].iter().zip(&xhat.sample(i)[range.clone()]) {
                    sum_g += g;
                    sum_gx += g * xh;
                }
            }
            self.grad_beta[m] += sum_g;
            self.grad_gamma[m] += sum_gx;
            let k = self.gamma[m] * inv_std[m] / cnt;
            for i in 0..grad.n() {
                let g = &grad.sample(i)[range.clone()];
                let xh = &xhat.sample(i)[range.clone()];
                let o = &mut out.sample_mut(i)[range.clone()];
                for ((o, &g), &xh) in o.iter_mut().zip(g).zip(xh) {
                    *o = k * (cnt * g - sum_g - xh * sum_gx);
                }
            }
        }
        Ok(out)
    }
}

pub fn relu<F: Real>(x: &Batch<F>) -> Batch<F> {
    let mut out = x.clone();
    out.as_mut_slice().iter_mut().for_each(|v| *v = v.max(F::zero()));
    out
}

/// Gradient through ReLU given the layer input.
pub fn relu_backward<F: Real>(grad: &Batch<F>, input: &Batch<F>) -> Batch<F> {
    let mut out = grad.clone();
    for (g, &x) in out.as_mut_slice().iter_mut().zip(input.as_slice()) {
        if x <= F::zero() {
            *g = F::zero();
        }
    }
    out
}

/// Max-pool over non-overlapping windows along depth only; a trailing
/// partial window is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthPool {
    pub size: usize,
    cache: Option<([usize; 4], Vec<u32>)>,
}

impl DepthPool {
    pub fn new(size: usize) -> Self {
        Self { size, cache: None }
    }

    pub fn out_dims(&self, [c, d, h, w]: [usize; 4]) -> [usize; 4] {
        [c, d / self.size, h, w]
    }

    fn pool<F: Real>(&self, x: &Batch<F>) -> Result<(Batch<F>, Vec<u32>), NnError> {
        let dims = x.dims();
        let od = self.out_dims(dims);
        if od[1] == 0 {
            return Err(NnError::ShapeMismatch(format!("depth {} below pool size {}", dims[1], self.size)));
        }
        let plane = dims[2] * dims[3];
        let mut out = Batch::zeros(x.n(), od);
        let mut arg = Vec::with_capacity(out.as_slice().len());
        for i in 0..x.n() {
            let s = x.sample(i);
            let o = out.sample_mut(i);
            let mut oi = 0;
            for c in 0..dims[0] {
                for t in 0..od[1] {
                    for p in 0..plane {
                        let mut best = (c * dims[1] + t * self.size) * plane + p;
                        for k in 1..self.size {
                            let idx = (c * dims[1] + t * self.size + k) * plane + p;
                            if s[idx] > s[best] {
                                best = idx;
                            }
                        }
                        o[oi] = s[best];
                        arg.push(best as u32);
                        oi += 1;
                    }
                }
            }
        }
        Ok((out, arg))
    }

    pub fn infer<F: Real>(&self, x: &Batch<F>) -> Result<Batch<F>, NnError> {
        Ok(self.pool(x)?.0)
    }

    pub fn forward<F: Real>(&mut self, x: &Batch<F>) -> Result<Batch<F>, NnError> {
        let (out, arg) = self.pool(x)?;
        self.cache = Some((x.dims(), arg));
        Ok(out)
    }

    pub fn backward<F: Real>(&mut self, grad: &Batch<F>) -> Result<Batch<F>, NnError> {
        let (in_dims, arg) = take_cache(&mut self.cache, "max-pool")?;
        let mut out = Batch::zeros(grad.n(), in_dims);
        let per = grad.sample_len();
        for i in 0..grad.n() {
            let g = grad.sample(i);
            let o = out.sample_mut(i);
            for (k, &gv) in g.iter().enumerate() {
                o[arg[i * per + k] as usize] += gv;
            }
        }
        Ok(out)
    }
}

/// Fully connected layer on flattened samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub inputs: usize,
    pub outputs: usize,
    /// outputs x inputs.
    pub weights: Vec<F>,
    pub bias: Vec<F>,
    pub(crate) grad_w: Vec<F>,
    pub(crate) grad_b: Vec<F>,
    cache: Option<Batch<F>>,
}

impl<F: Real> Dense<F> {
    pub fn new(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![F::zero(); inputs * outputs],
            bias: vec![F::zero(); outputs],
            grad_w: vec![F::zero(); inputs * outputs],
            grad_b: vec![F::zero(); outputs],
            cache: None,
        }
    }

    pub fn infer(&self, x: &Batch<F>) -> Result<Batch<F>, NnError> {
        if x.sample_len() != self.inputs {
            return Err(NnError::ShapeMismatch(format!(
                "dense expects {} inputs, got {}",
                self.inputs,
                x.sample_len()
            )));
        }
        let mut out = Batch::zeros(x.n(), [self.outputs, 1, 1, 1]);
        for i in 0..x.n() {
            let xi = x.sample(i);
            let o = out.sample_mut(i);
            for (k, ok) in o.iter_mut().enumerate() {
                *ok = dot(&self.weights[k * self.inputs..(k + 1) * self.inputs], xi) + self.bias[k];
            }
        }
        Ok(out)
    }

    pub fn forward(&mut self, x: &Batch<F>) -> Result<Batch<F>, NnError> {
        let out = self.infer(x)?;
        self.cache = Some(x.clone());
        Ok(out)
    }

    pub fn backward(&mut self, grad: &Batch<F>) -> Result<Batch<F>, NnError> {
        let x = take_cache(&mut self.cache, "dense")?;
        let mut out = Batch::zeros(x.n(), x.dims());
        for i in 0..x.n() {
            let g = grad.sample(i);
            let xi = x.sample(i);
            let gi = out.sample_mut(i);
            for (k, &gk) in g.iter().enumerate() {
                if gk == F::zero() {
                    continue;
                }
                self.grad_b[k] += gk;
                axpy(gk, xi, &mut self.grad_w[k * self.inputs..(k + 1) * self.inputs]);
                axpy(gk, &self.weights[k * self.inputs..(k + 1) * self.inputs], gi);
            }
        }
        Ok(out)
    }
}

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)` at train
/// time so eval mode is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Dropout {
    pub rate: f64,
    cache: Option<Vec<bool>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Self {
        Self { rate, cache: None }
    }

    pub fn forward<F: Real>(&mut self, x: &Batch<F>, rng: &mut ChaCha8Rng) -> Batch<F> {
        let keep = F::of(1.0 / (1.0 - self.rate));
        let mask: Vec<bool> = (0..x.as_slice().len())
            .map(|_| rng.gen::<f64>() >= self.rate)
            .collect();
        let mut out = x.clone();
        for (v, &k) in out.as_mut_slice().iter_mut().zip(&mask) {
            *v = if k { *v * keep } else { F::zero() };
        }
        self.cache = Some(mask);
        out
    }

    pub fn backward<F: Real>(&mut self, grad: &Batch<F>) -> Result<Batch<F>, NnError> {
        let mask = take_cache(&mut self.cache, "dropout")?;
        let keep = F::of(1.0 / (1.0 - self.rate));
        let mut out = grad.clone();
        for (v, &k) in out.as_mut_slice().iter_mut().zip(&mask) {
            *v = if k { *v * keep } else { F::zero() };
        }
        Ok(out)
    }
}

/// Numerically stable softmax.
pub fn softmax<F: Real>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: F = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Cross-entropy of `softmax(logits)` against `label`: returns
/// `(-ln p[label], p - onehot(label))`.
pub fn softmax_xent<F: Real>(logits: &[F], label: usize) -> Result<(F, Vec<F>), NnError> {
    if label >= logits.len() {
        return Err(NnError::InvalidLabel {
            label,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let log_total = logits.iter().map(|&z| (z - max).exp()).sum::<F>().ln();
    let loss = -(logits[label] - max - log_total);
    let mut grad = softmax(logits);
    grad[label] -= F::one();
    Ok((loss, grad))
}
