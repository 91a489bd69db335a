//! EEGT binary tensor format.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size      | field                          |
//! |--------|-----------|--------------------------------|
//! | 0      | 4         | magic `EEGT`                   |
//! | 4      | 4 (u32)   | version, currently 1           |
//! | 8      | 4 (u32)   | dtype: 0 = f32, 1 = f64        |
//! | 12     | 4 (u32)   | ndim                           |
//! | 16     | 8 * ndim  | dims (u64)                     |
//! | ...    | rest      | row-major little-endian values |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"EEGT";
pub const VERSION: u32 = 1;
/// Upper bound on the number of dimensions a header may declare.
pub const MAX_NDIM: u32 = 16;

#[derive(Debug, Error)]
pub enum EegtError {
    #[error("bad magic {0:?}, expected \"EEGT\"")]
    BadMagic([u8; 4]),
    #[error("unsupported EEGT version {0}")]
    UnsupportedVersion(u32),
    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u32),
    #[error("declared dimensions overflow: {0}")]
    DimOverflow(String),
    #[error("payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },
    #[error("{0} unexpected bytes after payload")]
    TrailingBytes(u64),
    #[error("data length {len} does not match dims {dims:?}")]
    ShapeMismatch { dims: Vec<usize>, len: usize },
    #[error("tensor I/O failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    fn code(self) -> u32 {
        match self {
            DType::F32 => 0,
            DType::F64 => 1,
        }
    }

    fn size(self) -> u64 {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
        }
    }

    /// Values widened to f64.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            TensorData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            TensorData::F64(v) => v.clone(),
        }
    }
}

/// An n-dimensional row-major tensor as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct EegtTensor {
    dims: Vec<usize>,
    data: TensorData,
}

impl EegtTensor {
    pub fn new(dims: Vec<usize>, data: TensorData) -> Result<Self, EegtError> {
        let expected = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| EegtError::DimOverflow(format!("{dims:?}")))?;
        if expected != data.len() {
            return Err(EegtError::ShapeMismatch {
                dims,
                len: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn from_f64(dims: Vec<usize>, data: Vec<f64>) -> Result<Self, EegtError> {
        Self::new(dims, TensorData::F64(data))
    }

    pub fn from_f32(dims: Vec<usize>, data: Vec<f32>) -> Result<Self, EegtError> {
        Self::new(dims, TensorData::F32(data))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn into_data(self) -> TensorData {
        self.data
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), EegtError> {
        out.write_all(&MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&self.data.dtype().code().to_le_bytes())?;
        out.write_all(&(self.dims.len() as u32).to_le_bytes())?;
        for &d in &self.dims {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        match &self.data {
            TensorData::F32(v) => {
                for x in v {
                    out.write_all(&x.to_le_bytes())?;
                }
            }
            TensorData::F64(v) => {
                for x in v {
                    out.write_all(&x.to_le_bytes())?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, EegtError> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(EegtError::BadMagic(magic));
        }
        let version = read_u32(&mut input)?;
        if version != VERSION {
            return Err(EegtError::UnsupportedVersion(version));
        }
        let dtype = match read_u32(&mut input)? {
            0 => DType::F32,
            1 => DType::F64,
            other => return Err(EegtError::UnsupportedDtype(other)),
        };
        let ndim = read_u32(&mut input)?;
        if ndim > MAX_NDIM {
            return Err(EegtError::DimOverflow(format!("ndim {ndim} exceeds {MAX_NDIM}")));
        }
        let mut dims = Vec::with_capacity(ndim as usize);
        let mut count: u64 = 1;
        for _ in 0..ndim {
            let mut buf = [0u8; 8];
            input.read_exact(&mut buf)?;
            let d = u64::from_le_bytes(buf);
            count = count
                .checked_mul(d)
                .ok_or_else(|| EegtError::DimOverflow(format!("element count overflows at dim {d}")))?;
            let d = usize::try_from(d).map_err(|_| EegtError::DimOverflow(format!("dim {d}")))?;
            dims.push(d);
        }
        let expected = count
            .checked_mul(dtype.size())
            .ok_or_else(|| EegtError::DimOverflow(format!("{count} elements")))?;
        usize::try_from(expected).map_err(|_| EegtError::DimOverflow(format!("{expected} bytes")))?;

        // Read at most one byte past the declared payload so that a bogus
        // header cannot force a huge allocation.
        let mut payload = Vec::new();
        input.take(expected.saturating_add(1)).read_to_end(&mut payload)?;
        let found = payload.len() as u64;
        if found < expected {
            return Err(EegtError::TruncatedPayload { expected, found });
        }
        if found > expected {
            return Err(EegtError::TrailingBytes(found - expected));
        }

        let data = match dtype {
            DType::F32 => TensorData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ),
            DType::F64 => TensorData::F64(
                payload
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                    .collect(),
            ),
        };
        Ok(Self { dims, data })
    }
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32, EegtError> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn write_tensor(tensor: &EegtTensor, path: impl AsRef<Path>) -> Result<(), EegtError> {
    tensor.write_to(BufWriter::new(File::create(path)?))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<EegtTensor, EegtError> {
    EegtTensor::read_from(BufReader::new(File::open(path)?))
}
