use super::{NnError, Real};

/// maps x depth x height x width, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<F> {
    dims: [usize; 4],
    data: Vec<F>,
}

impl<F: Real> Tensor4<F> {
    pub fn zeros(dims: [usize; 4]) -> Self {
        Self {
            dims,
            data: vec![F::zero(); dims.iter().product()],
        }
    }

    pub fn new(dims: [usize; 4], data: Vec<F>) -> Result<Self, NnError> {
        if data.len() != dims.iter().product::<usize>() {
            return Err(NnError::ShapeMismatch(format!(
                "{} values for dims {dims:?}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: [usize; 4], mut f: impl FnMut([usize; 4]) -> F) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for m in 0..dims[0] {
            for d in 0..dims[1] {
                for h in 0..dims[2] {
                    for w in 0..dims[3] {
                        data.push(f([m, d, h, w]));
                    }
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<F> {
        self.data
    }

    #[inline]
    pub fn offset(&self, [m, d, h, w]: [usize; 4]) -> usize {
        ((m * self.dims[1] + d) * self.dims[2] + h) * self.dims[3] + w
    }

    pub fn get(&self, idx: [usize; 4]) -> F {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: [usize; 4], v: F) {
        let o = self.offset(idx);
        self.data[o] = v;
    }
}

/// A batch of equally shaped samples stored back to back.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<F> {
    n: usize,
    dims: [usize; 4],
    data: Vec<F>,
}

impl<F: Real> Batch<F> {
    pub fn zeros(n: usize, dims: [usize; 4]) -> Self {
        Self {
            n,
            dims,
            data: vec![F::zero(); n * dims.iter().product::<usize>()],
        }
    }

    pub fn new(n: usize, dims: [usize; 4], data: Vec<F>) -> Result<Self, NnError> {
        if data.len() != n * dims.iter().product::<usize>() {
            return Err(NnError::ShapeMismatch(format!(
                "{} values for {n} samples of {dims:?}",
                data.len()
            )));
        }
        Ok(Self { n, dims, data })
    }

    pub fn from_samples(samples: &[Tensor4<F>]) -> Result<Self, NnError> {
        let dims = samples
            .first()
            .map(Tensor4::dims)
            .ok_or_else(|| NnError::ShapeMismatch("empty batch".into()))?;
        let mut data = Vec::with_capacity(samples.len() * dims.iter().product::<usize>());
        for s in samples {
            if s.dims() != dims {
                return Err(NnError::ShapeMismatch(format!(
                    "sample dims {:?} differ from {dims:?}",
                    s.dims()
                )));
            }
            data.extend_from_slice(s.as_slice());
        }
        Ok(Self {
            n: samples.len(),
            dims,
            data,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn sample_len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn sample(&self, i: usize) -> &[F] {
        let len = self.sample_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn sample_mut(&mut self, i: usize) -> &mut [F] {
        let len = self.sample_len();
        &mut self.data[i * len..(i + 1) * len]
    }

    pub fn sample_tensor(&self, i: usize) -> Tensor4<F> {
        Tensor4 {
            dims: self.dims,
            data: self.sample(i).to_vec(),
        }
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    /// Same data viewed with other per-sample dims of equal size.
    pub fn reshape(self, dims: [usize; 4]) -> Result<Self, NnError> {
        if dims.iter().product::<usize>() != self.sample_len() {
            return Err(NnError::ShapeMismatch(format!(
                "cannot view {:?} as {dims:?}",
                self.dims
            )));
        }
        Ok(Self { dims, ..self })
    }
}
