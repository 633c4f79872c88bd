//! TT-SVD of a single tensorized vector and its MPS reconstruction.
//!
//! A vector `x` of length `d = I1 * ... * IN` is folded little-endian into an
//! order-N tensor and swept left to right: at step k the remainder is viewed
//! as an `(r_{k-1} I_k) x (I_{k+1} ... I_N)` matrix, truncated with
//! `delta = eps / sqrt(N - 1) * ||x||`, the left factor becomes core k and
//! `S V^T` carries on. The per-step discards add in quadrature, so with no
//! binding rank cap the final error is at most `eps * ||x||`.

use nalgebra::{DMatrix, DMatrixView};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{norm2, trunc_svd, SvdError};
use crate::tensor::{DenseTensor, TensorError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TtError {
    #[error("vector length {len} does not match tensor size {dims:?} (product {product})")]
    LengthMismatch {
        len: usize,
        dims: Vec<usize>,
        product: usize,
    },
    #[error("invalid tensor size {0:?}: need at least one mode and all sizes >= 1")]
    InvalidDims(Vec<usize>),
    #[error("rank caps must have {expected} entries (r0..rN), got {got}")]
    RankCapLength { expected: usize, got: usize },
    #[error("boundary rank caps must be 1, got r0={first}, rN={last}")]
    BoundaryRank { first: usize, last: usize },
    #[error("rank caps must be >= 1")]
    ZeroRankCap,
    #[error("epsilon must be finite and non-negative, got {0}")]
    InvalidEpsilon(f64),
    #[error("core {core} has dims {dims:?}, which breaks the rank chain: {reason}")]
    RankChain {
        core: usize,
        dims: Vec<usize>,
        reason: String,
    },
    #[error(transparent)]
    Svd(#[from] SvdError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Hyperparameters for compressing one vector: tensor size, optional rank
/// caps `r0..rN`, and the relative accuracy `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtConfig {
    pub dims: Vec<usize>,
    pub rank_caps: Option<Vec<usize>>,
    pub epsilon: f64,
}

impl TtConfig {
    pub fn new(dims: Vec<usize>, rank_caps: Option<Vec<usize>>, epsilon: f64) -> Result<Self, TtError> {
        let cfg = Self {
            dims,
            rank_caps,
            epsilon,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Uncapped config; truncation is driven by `epsilon` alone.
    pub fn uncapped(dims: Vec<usize>, epsilon: f64) -> Result<Self, TtError> {
        Self::new(dims, None, epsilon)
    }

    /// Every interior rank capped at `rank`.
    pub fn uniform(dims: Vec<usize>, rank: usize, epsilon: f64) -> Result<Self, TtError> {
        let n = dims.len();
        let mut caps = vec![rank; n + 1];
        caps[0] = 1;
        caps[n] = 1;
        Self::new(dims, Some(caps), epsilon)
    }

    pub fn validate(&self) -> Result<(), TtError> {
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(TtError::InvalidDims(self.dims.clone()));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(TtError::InvalidEpsilon(self.epsilon));
        }
        if let Some(caps) = &self.rank_caps {
            let n = self.dims.len();
            if caps.len() != n + 1 {
                return Err(TtError::RankCapLength {
                    expected: n + 1,
                    got: caps.len(),
                });
            }
            if caps[0] != 1 || caps[n] != 1 {
                return Err(TtError::BoundaryRank {
                    first: caps[0],
                    last: caps[n],
                });
            }
            if caps.contains(&0) {
                return Err(TtError::ZeroRankCap);
            }
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.dims.iter().product()
    }

    /// Caps clamped to the feasibility bound `r_k <= min(r_{k-1} I_k, prod_{j>k} I_j)`.
    /// Without caps this is the full-rank (lossless) rank profile.
    pub fn clamped_caps(&self) -> Vec<usize> {
        let n = self.dims.len();
        let mut ranks = vec![1; n + 1];
        for k in 1..n {
            let right: usize = self.dims[k..].iter().product();
            let bound = (ranks[k - 1] * self.dims[k - 1]).min(right);
            ranks[k] = match &self.rank_caps {
                Some(caps) => caps[k].min(bound),
                None => bound,
            };
        }
        ranks
    }
}

/// A vector in MPS form: cores `G_k` with dims `(r_{k-1}, I_k, r_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MpsCores {
    cores: Vec<DenseTensor>,
    ranks: Vec<usize>,
}

impl MpsCores {
    /// Builds from cores, checking `r0 = rN = 1` and the rank chain.
    pub fn from_cores(cores: Vec<DenseTensor>) -> Result<Self, TtError> {
        if cores.is_empty() {
            return Err(TtError::InvalidDims(Vec::new()));
        }
        let mut ranks = Vec::with_capacity(cores.len() + 1);
        for (k, core) in cores.iter().enumerate() {
            let dims = core.dims();
            if dims.len() != 3 {
                return Err(TtError::RankChain {
                    core: k,
                    dims: dims.to_vec(),
                    reason: "core is not order 3".into(),
                });
            }
            match ranks.last() {
                None if dims[0] != 1 => {
                    return Err(TtError::RankChain {
                        core: k,
                        dims: dims.to_vec(),
                        reason: "r0 must be 1".into(),
                    })
                }
                Some(&prev) if prev != dims[0] => {
                    return Err(TtError::RankChain {
                        core: k,
                        dims: dims.to_vec(),
                        reason: format!("left rank {} != previous right rank {prev}", dims[0]),
                    })
                }
                None => ranks.push(dims[0]),
                _ => {}
            }
            ranks.push(dims[2]);
        }
        let last = cores.len() - 1;
        if ranks[last + 1] != 1 {
            return Err(TtError::RankChain {
                core: last,
                dims: cores[last].dims().to_vec(),
                reason: "rN must be 1".into(),
            });
        }
        Ok(Self { cores, ranks })
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// Mode sizes `I1..IN`.
    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.dims()[1]).collect()
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    /// Length of the reconstructed vector.
    pub fn d(&self) -> usize {
        self.cores.iter().map(|c| c.dims()[1]).product()
    }

    /// Stored scalars, `sum_k r_{k-1} I_k r_k`.
    pub fn param_count(&self) -> usize {
        self.cores.iter().map(DenseTensor::len).sum()
    }

    pub fn compression_ratio(&self) -> f64 {
        compression_ratio_ttd(self.d(), self.param_count())
    }
}

/// `sum_k r_{k-1} I_k r_k` for a tensor size and ranks `r0..rN`.
///
/// Panics if `ranks.len() != dims.len() + 1`.
pub fn param_count(dims: &[usize], ranks: &[usize]) -> usize {
    assert_eq!(ranks.len(), dims.len() + 1, "ranks must be r0..rN");
    dims.iter().enumerate().map(|(k, &i)| ranks[k] * i * ranks[k + 1]).sum()
}

/// Per-vector ratio `d / stored - 1`. Negative when the MPS is larger than the
/// raw vector.
pub fn compression_ratio_ttd(d: usize, stored_params: usize) -> f64 {
    d as f64 / stored_params as f64 - 1.0
}

/// Truncation threshold for an order-N sweep: `eps / sqrt(N - 1) * norm`.
pub fn delta_for(epsilon: f64, order: usize, norm: f64) -> f64 {
    if order < 2 {
        return 0.0;
    }
    epsilon / ((order - 1) as f64).sqrt() * norm
}

pub fn tt_svd(x: &[f64], cfg: &TtConfig) -> Result<MpsCores, TtError> {
    cfg.validate()?;
    let product = cfg.d();
    if x.len() != product {
        return Err(TtError::LengthMismatch {
            len: x.len(),
            dims: cfg.dims.clone(),
            product,
        });
    }
    let n = cfg.dims.len();
    if n == 1 {
        let core = DenseTensor::new(vec![1, product, 1], x.to_vec())?;
        return MpsCores::from_cores(vec![core]);
    }

    let delta = delta_for(cfg.epsilon, n, norm2(x));
    let mut cores = Vec::with_capacity(n);
    let mut remainder = x.to_vec();
    let mut left_rank = 1;
    for k in 0..n - 1 {
        let rows = left_rank * cfg.dims[k];
        let cols = remainder.len() / rows;
        let z = DMatrix::from_column_slice(rows, cols, &remainder);
        let cap = cfg.rank_caps.as_ref().map(|caps| caps[k + 1]);
        let svd = trunc_svd(&z, delta, cap)?;

        let (u, next) = if svd.rank() == 0 {
            // All-zero remainder: carry a single zero bond.
            (vec![0.0; rows], vec![0.0; cols])
        } else {
            (svd.u.as_slice().to_vec(), svd.s_vt().as_slice().to_vec())
        };
        let rank = svd.rank().max(1);
        cores.push(DenseTensor::new(vec![left_rank, cfg.dims[k], rank], u)?);
        remainder = next;
        left_rank = rank;
    }
    cores.push(DenseTensor::new(vec![left_rank, cfg.dims[n - 1], 1], remainder)?);
    MpsCores::from_cores(cores)
}

/// Contracts the chain left to right and returns the flat vector.
pub fn reconstruct(mps: &MpsCores) -> Vec<f64> {
    let first = &mps.cores[0];
    let mut acc = DMatrix::from_column_slice(first.dims()[1], first.dims()[2], first.data());
    for core in &mps.cores[1..] {
        let [r_prev, size, r_next] = [core.dims()[0], core.dims()[1], core.dims()[2]];
        let g = DMatrixView::from_slice(core.data(), r_prev, size * r_next);
        let prefix = acc.nrows();
        let product = &acc * g;
        acc = product.reshape_generic(nalgebra::Dyn(prefix * size), nalgebra::Dyn(r_next));
    }
    acc.as_slice().to_vec()
}
