//! Dense order-N tensors with little-endian (first index fastest) linearization.
//!
//! Every reshape in the crate goes through this single convention: the entry
//! `A[i1, ..., iN]` (1-based) lives at flat offset `sum_k (i_k - 1) * prod_{p<k} I_p`.
//! Because matrices here are column-major, a little-endian tensor viewed with
//! dims `(rows, cols)` is exactly a column-major matrix, so tensorization and
//! mode-1 unfolding never move data.

use nalgebra::{DMatrix, DMatrixView};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("size mismatch: dims {dims:?} have product {product} but data has length {len}")]
    SizeMismatch {
        dims: Vec<usize>,
        product: usize,
        len: usize,
    },
    #[error("tensor must have at least one mode")]
    EmptyDims,
    #[error("mode sizes must be positive, got {0:?}")]
    ZeroMode(Vec<usize>),
    #[error("mode {mode} out of range for an order-{order} tensor (modes are 1-based)")]
    ModeOutOfRange { mode: usize, order: usize },
    #[error("contracted modes differ in size: {left} vs {right}")]
    ModeSizeMismatch { left: usize, right: usize },
    #[error("index {index:?} out of bounds for dims {dims:?}")]
    IndexOutOfBounds { index: Vec<usize>, dims: Vec<usize> },
}

/// An order-N real tensor stored flat in little-endian order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

fn check_dims(dims: &[usize]) -> Result<usize, TensorError> {
    if dims.is_empty() {
        return Err(TensorError::EmptyDims);
    }
    if dims.contains(&0) {
        return Err(TensorError::ZeroMode(dims.to_vec()));
    }
    Ok(dims.iter().product())
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        let product = check_dims(&dims)?;
        if product != data.len() {
            return Err(TensorError::SizeMismatch {
                dims,
                product,
                len: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self, TensorError> {
        let product = check_dims(&dims)?;
        Ok(Self {
            dims,
            data: vec![0.0; product],
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Flat offset of a 0-based multi-index.
    fn offset(&self, index: &[usize]) -> Option<usize> {
        if index.len() != self.dims.len() {
            return None;
        }
        let mut offset = 0;
        let mut stride = 1;
        for (&i, &n) in index.iter().zip(&self.dims) {
            if i >= n {
                return None;
            }
            offset += i * stride;
            stride *= n;
        }
        Some(offset)
    }

    /// Entry at a 1-based multi-index, `A[i1, ..., iN]`.
    pub fn get(&self, index: &[usize]) -> Result<f64, TensorError> {
        let zero_based: Option<Vec<usize>> = index.iter().map(|&i| i.checked_sub(1)).collect();
        zero_based
            .and_then(|ix| self.offset(&ix))
            .map(|o| self.data[o])
            .ok_or_else(|| TensorError::IndexOutOfBounds {
                index: index.to_vec(),
                dims: self.dims.clone(),
            })
    }

    /// Entry at a 0-based multi-index. Panics when out of bounds.
    pub fn at(&self, index: &[usize]) -> f64 {
        let o = self
            .offset(index)
            .unwrap_or_else(|| panic!("index {index:?} out of bounds for {:?}", self.dims));
        self.data[o]
    }

    /// Mode-1 unfolding as a borrowed `I1 x (I2...IN)` column-major view.
    pub fn mode1_view(&self) -> DMatrixView<'_, f64> {
        let rows = self.dims[0];
        DMatrixView::from_slice(&self.data, rows, self.data.len() / rows)
    }

    /// Mode-`mode` matricization (1-based), `I_k x prod_{j != k} I_j`.
    ///
    /// Columns enumerate the remaining indices little-endian, so mode 1 is
    /// a plain copy of the flat data.
    pub fn matricize(&self, mode: usize) -> Result<DMatrix<f64>, TensorError> {
        if mode == 0 || mode > self.order() {
            return Err(TensorError::ModeOutOfRange {
                mode,
                order: self.order(),
            });
        }
        let k = mode - 1;
        let pre: usize = self.dims[..k].iter().product();
        let size = self.dims[k];
        let post: usize = self.dims[k + 1..].iter().product();
        if pre == 1 {
            return Ok(DMatrix::from_column_slice(size, post, &self.data));
        }
        let mut out = DMatrix::zeros(size, pre * post);
        for s in 0..post {
            for q in 0..size {
                let base = pre * (q + size * s);
                for p in 0..pre {
                    out[(q, p + pre * s)] = self.data[base + p];
                }
            }
        }
        Ok(out)
    }

    /// Drops every size-1 mode; keeps a single mode when all are size 1.
    pub fn squeeze(&self) -> Self {
        let mut dims: Vec<usize> = self.dims.iter().copied().filter(|&n| n != 1).collect();
        if dims.is_empty() {
            dims.push(1);
        }
        Self {
            dims,
            data: self.data.clone(),
        }
    }
}

/// Attaches `dims` to a flat vector. No data moves.
pub fn tensorize(x: &[f64], dims: &[usize]) -> Result<DenseTensor, TensorError> {
    DenseTensor::new(dims.to_vec(), x.to_vec())
}

pub fn vectorize(t: &DenseTensor) -> Vec<f64> {
    t.data.clone()
}

pub fn matricize(t: &DenseTensor, mode: usize) -> Result<DMatrix<f64>, TensorError> {
    t.matricize(mode)
}

/// Contracts mode `mode_a` of `a` with mode `mode_b` of `b` (both 1-based).
///
/// The result keeps the remaining modes of `a` followed by the remaining
/// modes of `b`, in their original order. Contracting two vectors yields a
/// one-element tensor with dims `[1]`, since order-0 tensors are not
/// represented.
pub fn contract(a: &DenseTensor, b: &DenseTensor, mode_a: usize, mode_b: usize) -> Result<DenseTensor, TensorError> {
    let left = a.matricize(mode_a)?;
    let right = b.matricize(mode_b)?;
    if left.nrows() != right.nrows() {
        return Err(TensorError::ModeSizeMismatch {
            left: left.nrows(),
            right: right.nrows(),
        });
    }
    let product = left.tr_mul(&right);
    let mut dims: Vec<usize> = a
        .dims
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != mode_a - 1)
        .map(|(_, &n)| n)
        .chain(
            b.dims
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != mode_b - 1)
                .map(|(_, &n)| n),
        )
        .collect();
    if dims.is_empty() {
        dims.push(1);
    }
    DenseTensor::new(dims, product.as_slice().to_vec())
}
