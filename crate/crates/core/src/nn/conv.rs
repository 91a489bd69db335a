//! 3D convolution over (depth, height, width) with zero padding.
//!
//! `out[j][x][y][z] = b[j] + sum_m sum_pqr W[j][m][p][q][r] *
//! in[m][x*sd + p - pd][y*sh + q - ph][z*sw + r - pw]`, reading zero outside
//! the input. Implemented by gathering each receptive field into a row
//! (im2col) and taking dot products with the kernel rows.

use super::real::{axpy, dot};
use super::{Batch, NnError, Real, Tensor4};

const PAD: u32 = u32::MAX;

/// Precomputed im2col gather table for one input shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGeometry {
    pub in_dims: [usize; 4],
    pub out_dims: [usize; 4],
    /// For output position n and kernel tap k, `index[n * K + k]` is the
    /// input offset or `PAD` for a zero-padding read.
    index: Vec<u32>,
}

impl ConvGeometry {
    pub fn new(
        in_dims: [usize; 4],
        out_maps: usize,
        kernel: [usize; 3],
        stride: [usize; 3],
        pad: [usize; 3],
    ) -> Result<Self, NnError> {
        let mut out_spatial = [0usize; 3];
        for a in 0..3 {
            if kernel[a] == 0 || stride[a] == 0 {
                return Err(NnError::ShapeMismatch(format!(
                    "kernel {kernel:?} / stride {stride:?} must be positive"
                )));
            }
            let padded = in_dims[a + 1] + 2 * pad[a];
            if padded < kernel[a] {
                return Err(NnError::ShapeMismatch(format!(
                    "padded input {:?} smaller than kernel {kernel:?}",
                    &in_dims[1..]
                )));
            }
            out_spatial[a] = (padded - kernel[a]) / stride[a] + 1;
        }
        let [c, d, h, w] = in_dims;
        if c * d * h * w >= PAD as usize {
            return Err(NnError::ShapeMismatch(format!("input {in_dims:?} too large")));
        }
        let [od, oh, ow] = out_spatial;
        let [kp, kq, kr] = kernel;
        let taps = c * kp * kq * kr;
        let mut index = Vec::with_capacity(od * oh * ow * taps);
        for x in 0..od {
            for y in 0..oh {
                for z in 0..ow {
                    for m in 0..c {
                        for p in 0..kp {
                            let ix = (x * stride[0] + p) as isize - pad[0] as isize;
                            for q in 0..kq {
                                let iy = (y * stride[1] + q) as isize - pad[1] as isize;
                                for r in 0..kr {
                                    let iz = (z * stride[2] + r) as isize - pad[2] as isize;
                                    let inside = ix >= 0
                                        && iy >= 0
                                        && iz >= 0
                                        && (ix as usize) < d
                                        && (iy as usize) < h
                                        && (iz as usize) < w;
                                    index.push(if inside {
                                        (((m * d + ix as usize) * h + iy as usize) * w + iz as usize) as u32
                                    } else {
                                        PAD
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(Self {
            in_dims,
            out_dims: [out_maps, od, oh, ow],
            index,
        })
    }

    pub fn positions(&self) -> usize {
        self.out_dims[1] * self.out_dims[2] * self.out_dims[3]
    }

    pub fn taps(&self) -> usize {
        self.index.len() / self.positions().max(1)
    }

    fn gather<F: Real>(&self, input: &[F], cols: &mut Vec<F>) {
        cols.clear();
        cols.extend(self.index.iter().map(|&i| {
            if i == PAD {
                F::zero()
            } else {
                input[i as usize]
            }
        }));
    }

    fn scatter_add<F: Real>(&self, cols: &[F], grad_in: &mut [F]) {
        for (&i, &g) in self.index.iter().zip(cols) {
            if i != PAD {
                grad_in[i as usize] += g;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv3Layer<F> {
    pub in_maps: usize,
    pub out_maps: usize,
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub pad: [usize; 3],
    /// out_maps x in_maps x P x Q x R.
    pub weights: Vec<F>,
    pub bias: Vec<F>,
    /// Weight decay coefficient; the penalty is `l2 * sum(W^2)`.
    pub l2: F,
    pub(crate) grad_w: Vec<F>,
    pub(crate) grad_b: Vec<F>,
    geometry: ConvGeometry,
    cache: Option<Batch<F>>,
    negate_weight_grad: bool,
}

/// Gradients of one convolution call.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<F> {
    pub input: Tensor4<F>,
    /// Includes the `2 * l2 * W` weight-decay term.
    pub weights: Vec<F>,
    pub bias: Vec<F>,
}

impl<F: Real> Conv3Layer<F> {
    /// Zero-initialized layer for inputs of shape `in_dims`.
    pub fn new(
        in_dims: [usize; 4],
        out_maps: usize,
        kernel: [usize; 3],
        stride: [usize; 3],
        pad: [usize; 3],
        l2: F,
    ) -> Result<Self, NnError> {
        let geometry = ConvGeometry::new(in_dims, out_maps, kernel, stride, pad)?;
        let n_weights = out_maps * in_dims[0] * kernel.iter().product::<usize>();
        Ok(Self {
            in_maps: in_dims[0],
            out_maps,
            kernel,
            stride,
            pad,
            weights: vec![F::zero(); n_weights],
            bias: vec![F::zero(); out_maps],
            l2,
            grad_w: vec![F::zero(); n_weights],
            grad_b: vec![F::zero(); out_maps],
            geometry,
            cache: None,
            negate_weight_grad: false,
        })
    }

    pub fn in_dims(&self) -> [usize; 4] {
        self.geometry.in_dims
    }

    pub fn out_dims(&self) -> [usize; 4] {
        self.geometry.out_dims
    }

    pub fn penalty(&self) -> F {
        self.l2 * self.weights.iter().map(|&w| w * w).sum::<F>()
    }

    /// Makes backward report weight gradients with the wrong sign. Only
    /// useful to show that the gradient checker catches broken backprop.
    #[doc(hidden)]
    pub fn corrupt_backward(&mut self) {
        self.negate_weight_grad = true;
    }

    fn geometry_for(&self, in_dims: [usize; 4]) -> Result<std::borrow::Cow<'_, ConvGeometry>, NnError> {
        if in_dims[0] != self.in_maps {
            return Err(NnError::ShapeMismatch(format!(
                "conv expects {} input maps, got {}",
                self.in_maps, in_dims[0]
            )));
        }
        if in_dims == self.geometry.in_dims {
            Ok(std::borrow::Cow::Borrowed(&self.geometry))
        } else {
            ConvGeometry::new(in_dims, self.out_maps, self.kernel, self.stride, self.pad)
                .map(std::borrow::Cow::Owned)
        }
    }

    fn forward_sample(&self, geo: &ConvGeometry, input: &[F], out: &mut [F], cols: &mut Vec<F>) {
        geo.gather(input, cols);
        let taps = geo.taps();
        let positions = geo.positions();
        for j in 0..self.out_maps {
            let w = &self.weights[j * taps..(j + 1) * taps];
            let b = self.bias[j];
            let out_j = &mut out[j * positions..(j + 1) * positions];
            for (n, o) in out_j.iter_mut().enumerate() {
                *o = dot(w, &cols[n * taps..(n + 1) * taps]) + b;
            }
        }
    }

    /// Accumulates data-term gradients of one sample (no weight decay).
    fn backward_sample(
        &self,
        geo: &ConvGeometry,
        grad_out: &[F],
        input: &[F],
        grad_in: &mut [F],
        grad_w: &mut [F],
        grad_b: &mut [F],
        cols: &mut Vec<F>,
        dcols: &mut Vec<F>,
    ) {
        geo.gather(input, cols);
        let taps = geo.taps();
        let positions = geo.positions();
        dcols.clear();
        dcols.resize(cols.len(), F::zero());
        for j in 0..self.out_maps {
            let g_j = &grad_out[j * positions..(j + 1) * positions];
            let w = &self.weights[j * taps..(j + 1) * taps];
            let gw = &mut grad_w[j * taps..(j + 1) * taps];
            let mut gb = F::zero();
            for (n, &g) in g_j.iter().enumerate() {
                if g == F::zero() {
                    continue;
                }
                gb += g;
                axpy(g, &cols[n * taps..(n + 1) * taps], gw);
                axpy(g, w, &mut dcols[n * taps..(n + 1) * taps]);
            }
            grad_b[j] += gb;
        }
        geo.scatter_add(dcols, grad_in);
    }

    /// Batch forward without caching.
    pub fn infer(&self, input: &Batch<F>) -> Result<Batch<F>, NnError> {
        let geo = self.geometry_for(input.dims())?;
        let mut out = Batch::zeros(input.n(), geo.out_dims);
        let mut cols = Vec::new();
        for i in 0..input.n() {
            self.forward_sample(&geo, input.sample(i), out.sample_mut(i), &mut cols);
        }
        Ok(out)
    }

    /// Batch forward that keeps the input for [`Self::backward`].
    pub fn forward(&mut self, input: &Batch<F>) -> Result<Batch<F>, NnError> {
        let out = self.infer(input)?;
        self.cache = Some(input.clone());
        Ok(out)
    }

    /// Batch backward. Parameter gradients accumulate into the layer; the
    /// weight-decay gradient is added once per call.
    pub fn backward(&mut self, grad_out: &Batch<F>) -> Result<Batch<F>, NnError> {
        let input = self
            .cache
            .take()
            .ok_or_else(|| NnError::State("conv backward without forward".into()))?;
        let geo = self.geometry_for(input.dims())?.into_owned();
        if grad_out.dims() != geo.out_dims || grad_out.n() != input.n() {
            return Err(NnError::ShapeMismatch(format!(
                "conv grad {:?} vs output {:?}",
                grad_out.dims(),
                geo.out_dims
            )));
        }
        let mut grad_in = Batch::zeros(input.n(), input.dims());
        let mut grad_w = vec![F::zero(); self.weights.len()];
        let mut grad_b = vec![F::zero(); self.bias.len()];
        let (mut cols, mut dcols) = (Vec::new(), Vec::new());
        for i in 0..input.n() {
            self.backward_sample(
                &geo,
                grad_out.sample(i),
                input.sample(i),
                grad_in.sample_mut(i),
                &mut grad_w,
                &mut grad_b,
                &mut cols,
                &mut dcols,
            );
        }
        let two_l2 = self.l2 + self.l2;
        let sign = if self.negate_weight_grad { -F::one() } else { F::one() };
        for ((acc, g), &w) in self.grad_w.iter_mut().zip(&grad_w).zip(&self.weights) {
            *acc += sign * (*g + two_l2 * w);
        }
        for (acc, g) in self.grad_b.iter_mut().zip(&grad_b) {
            *acc += *g;
        }
        Ok(grad_in)
    }
}

/// Single-sample convolution forward.
pub fn conv3_forward<F: Real>(input: &Tensor4<F>, layer: &Conv3Layer<F>) -> Result<Tensor4<F>, NnError> {
    let geo = layer.geometry_for(input.dims())?;
    let mut out = Tensor4::zeros(geo.out_dims);
    layer.forward_sample(&geo, input.as_slice(), out.as_mut_slice(), &mut Vec::new());
    Ok(out)
}

/// Single-sample convolution backward for upstream gradient `grad_out`.
pub fn conv3_backward<F: Real>(
    grad_out: &Tensor4<F>,
    input: &Tensor4<F>,
    layer: &Conv3Layer<F>,
) -> Result<ConvGrads<F>, NnError> {
    let geo = layer.geometry_for(input.dims())?;
    if grad_out.dims() != geo.out_dims {
        return Err(NnError::ShapeMismatch(format!(
            "conv grad {:?} vs output {:?}",
            grad_out.dims(),
            geo.out_dims
        )));
    }
    let mut grad_in = Tensor4::zeros(input.dims());
    let mut weights = vec![F::zero(); layer.weights.len()];
    let mut bias = vec![F::zero(); layer.bias.len()];
    layer.backward_sample(
        &geo,
        grad_out.as_slice(),
        input.as_slice(),
        grad_in.as_mut_slice(),
        &mut weights,
        &mut bias,
        &mut Vec::new(),
        &mut Vec::new(),
    );
    let two_l2 = layer.l2 + layer.l2;
    for (g, &w) in weights.iter_mut().zip(&layer.weights) {
        *g += two_l2 * w;
    }
    Ok(ConvGrads {
        input: grad_in,
        weights,
        bias,
    })
}
