//! Whole-vocabulary compression, the TTEV1 file format, and layer accounting.
//!
//! TTEV1 layout (little-endian):
//!
//! ```text
//! magic "TTEV" | version u32 = 1 | dtype u8 = 0 (f32) | 3 reserved bytes
//! d u64 | V u64 | N u32 | dims N x u32 | epsilon f64
//! per token: ranks (N+1) x u32, then cores 1..N as f32, each core
//!            linearized over (r_{k-1}, i_k, r_k) with the first index fastest
//! ```
//!
//! Cores are held as f64 in memory and rounded to f32 on save.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::emb::EmbeddingMatrix;
use crate::tensor::DenseTensor;
use crate::tt::{reconstruct, tt_svd, MpsCores, TtConfig, TtError};

pub const TTEV_MAGIC: &[u8; 4] = b"TTEV";
pub const TTEV_VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 0;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("embedding has length {actual}, expected d = {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite value in row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("token id {id} out of range for a vocabulary of {len} tokens")]
    TokenOutOfRange { id: usize, len: usize },
    #[error("tensor size {got:?} does not match the store's {store:?}")]
    DimsMismatch { store: Vec<usize>, got: Vec<usize> },
    #[error("parallelism must be at least 1")]
    ZeroParallelism,
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error("token {token}: {source}")]
    Compress {
        token: usize,
        #[source]
        source: TtError,
    },
    #[error(transparent)]
    Tt(#[from] TtError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Parse failures of a TTEV1 stream, each tagged with the byte offset.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("bad magic at offset {offset}: expected \"TTEV\", found {found:?}")]
    BadMagic { offset: usize, found: [u8; 4] },
    #[error("version mismatch at offset {offset}: expected {TTEV_VERSION}, found {found}")]
    Version { offset: usize, found: u32 },
    #[error("unsupported dtype {found} at offset {offset}")]
    Dtype { offset: usize, found: u8 },
    #[error("truncated stream at offset {offset}: needed {needed} bytes, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("inconsistent header or ranks at offset {offset}: {reason}")]
    Inconsistent { offset: usize, reason: String },
    #[error("{extra} trailing bytes at offset {offset}")]
    Trailing { offset: usize, extra: usize },
    #[error("io error: {0}")]
    Io(String),
}

/// Per-token MPS cores sharing one tensor size.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedVocabulary {
    dims: Vec<usize>,
    epsilon: f64,
    d: usize,
    tokens: Vec<MpsCores>,
    // Not serialized; `add_token` falls back to uncapped after a load.
    rank_caps: Option<Vec<usize>>,
}

fn pool(parallelism: usize) -> Result<rayon::ThreadPool, VocabError> {
    if parallelism == 0 {
        return Err(VocabError::ZeroParallelism);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| VocabError::ThreadPool(e.to_string()))
}

/// Compresses every row with `tt_svd` on a pool of `parallelism` threads.
/// Output is ordered by row and does not depend on the thread count.
pub fn compress_vocabulary(
    matrix: &EmbeddingMatrix,
    cfg: &TtConfig,
    parallelism: usize,
) -> Result<CompressedVocabulary, VocabError> {
    cfg.validate()?;
    let d = cfg.d();
    if matrix.cols() != d {
        return Err(VocabError::DimensionMismatch {
            expected: d,
            actual: matrix.cols(),
        });
    }
    if let Some((row, col)) = matrix.find_non_finite() {
        return Err(VocabError::NonFinite { row, col });
    }
    let tokens = pool(parallelism)?.install(|| {
        (0..matrix.rows())
            .into_par_iter()
            .map(|i| tt_svd(matrix.row(i), cfg).map_err(|source| VocabError::Compress { token: i, source }))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(CompressedVocabulary {
        dims: cfg.dims.clone(),
        epsilon: cfg.epsilon,
        d,
        tokens,
        rank_caps: cfg.rank_caps.clone(),
    })
}

impl CompressedVocabulary {
    pub fn empty(cfg: &TtConfig) -> Result<Self, VocabError> {
        cfg.validate()?;
        Ok(Self {
            dims: cfg.dims.clone(),
            epsilon: cfg.epsilon,
            d: cfg.d(),
            tokens: Vec::new(),
            rank_caps: cfg.rank_caps.clone(),
        })
    }

    /// Assembles a store from already-compressed tokens.
    pub fn from_tokens(dims: Vec<usize>, epsilon: f64, tokens: Vec<MpsCores>) -> Result<Self, VocabError> {
        let cfg = TtConfig::uncapped(dims, epsilon)?;
        for t in &tokens {
            if t.dims() != cfg.dims {
                return Err(VocabError::DimsMismatch {
                    store: cfg.dims.clone(),
                    got: t.dims(),
                });
            }
        }
        Ok(Self {
            d: cfg.d(),
            dims: cfg.dims,
            epsilon,
            tokens,
            rank_caps: None,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[MpsCores] {
        &self.tokens
    }

    pub fn rank_caps(&self) -> Option<&[usize]> {
        self.rank_caps.as_deref()
    }

    /// Config used for tokens appended without an override.
    pub fn config(&self) -> TtConfig {
        TtConfig {
            dims: self.dims.clone(),
            rank_caps: self.rank_caps.clone(),
            epsilon: self.epsilon,
        }
    }

    pub fn get_embedding(&self, token_id: usize) -> Result<Vec<f64>, VocabError> {
        self.tokens
            .get(token_id)
            .map(reconstruct)
            .ok_or(VocabError::TokenOutOfRange {
                id: token_id,
                len: self.tokens.len(),
            })
    }

    /// Reconstructs every token into a `V x d` matrix.
    pub fn reconstruct_all(&self, parallelism: usize) -> Result<EmbeddingMatrix, VocabError> {
        let rows = pool(parallelism)?.install(|| self.tokens.par_iter().map(reconstruct).collect::<Vec<_>>());
        Ok(EmbeddingMatrix::new(self.tokens.len(), self.d, rows.concat()).expect("rows have length d"))
    }

    /// Compresses `embedding` and appends it; returns the new token id.
    pub fn add_token(&mut self, embedding: &[f64], cfg: Option<&TtConfig>) -> Result<usize, VocabError> {
        let cfg = cfg.cloned().unwrap_or_else(|| self.config());
        if cfg.dims != self.dims {
            return Err(VocabError::DimsMismatch {
                store: self.dims.clone(),
                got: cfg.dims,
            });
        }
        if embedding.len() != self.d {
            return Err(VocabError::DimensionMismatch {
                expected: self.d,
                actual: embedding.len(),
            });
        }
        if let Some(col) = embedding.iter().position(|v| !v.is_finite()) {
            return Err(VocabError::NonFinite {
                row: self.tokens.len(),
                col,
            });
        }
        let id = self.tokens.len();
        let mps = tt_svd(embedding, &cfg).map_err(|source| VocabError::Compress { token: id, source })?;
        self.tokens.push(mps);
        Ok(id)
    }

    /// Stored scalars per token.
    pub fn token_param_counts(&self) -> Vec<usize> {
        self.tokens.iter().map(MpsCores::param_count).collect()
    }

    pub fn compressed_params(&self) -> u64 {
        self.tokens.iter().map(|t| t.param_count() as u64).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.dims.len();
        let mut buf = Vec::with_capacity(36 + 4 * n + self.compressed_params() as usize * 4);
        buf.extend_from_slice(TTEV_MAGIC);
        buf.extend_from_slice(&TTEV_VERSION.to_le_bytes());
        buf.push(DTYPE_F32);
        buf.extend_from_slice(&[0; 3]);
        buf.extend_from_slice(&(self.d as u64).to_le_bytes());
        buf.extend_from_slice(&(self.tokens.len() as u64).to_le_bytes());
        buf.extend_from_slice(&(n as u32).to_le_bytes());
        for &dim in &self.dims {
            buf.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        buf.extend_from_slice(&self.epsilon.to_le_bytes());
        for token in &self.tokens {
            for &r in token.ranks() {
                buf.extend_from_slice(&(r as u32).to_le_bytes());
            }
            for core in token.cores() {
                for &v in core.data() {
                    buf.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
        }
        buf
    }

    pub fn save<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        sink.write_all(&self.to_bytes())
    }

    pub fn load<R: Read>(mut source: R) -> Result<Self, FormatError> {
        let mut bytes = Vec::new();
        source
            .read_to_end(&mut bytes)
            .map_err(|e| FormatError::Io(e.to_string()))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut cur = Cursor { bytes, pos: 0 };

        let offset = cur.pos;
        let magic: [u8; 4] = cur.take(4)?.try_into().unwrap();
        if &magic != TTEV_MAGIC {
            return Err(FormatError::BadMagic { offset, found: magic });
        }
        let offset = cur.pos;
        let version = cur.u32()?;
        if version != TTEV_VERSION {
            return Err(FormatError::Version { offset, found: version });
        }
        let offset = cur.pos;
        let dtype = cur.take(1)?[0];
        if dtype != DTYPE_F32 {
            return Err(FormatError::Dtype { offset, found: dtype });
        }
        cur.take(3)?;
        let d_offset = cur.pos;
        let d = cur.u64()? as usize;
        let vocab_len = cur.u64()?;
        let n_offset = cur.pos;
        let n = cur.u32()? as usize;
        if n == 0 {
            return Err(FormatError::Inconsistent {
                offset: n_offset,
                reason: "tensor order N is 0".into(),
            });
        }
        let dims_offset = cur.pos;
        let mut dims = Vec::with_capacity(n.min(64));
        for _ in 0..n {
            dims.push(cur.u32()? as usize);
        }
        if dims.contains(&0) {
            return Err(FormatError::Inconsistent {
                offset: dims_offset,
                reason: format!("zero mode size in {dims:?}"),
            });
        }
        let product = dims.iter().try_fold(1usize, |acc, &x| acc.checked_mul(x));
        if product != Some(d) {
            return Err(FormatError::Inconsistent {
                offset: d_offset,
                reason: format!("d = {d} but dims {dims:?} multiply to {product:?}"),
            });
        }
        let eps_offset = cur.pos;
        let epsilon = cur.f64()?;
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(FormatError::Inconsistent {
                offset: eps_offset,
                reason: format!("epsilon {epsilon} is not a finite non-negative number"),
            });
        }

        let mut tokens = Vec::new();
        for _ in 0..vocab_len {
            let ranks_offset = cur.pos;
            let mut ranks = Vec::with_capacity(n + 1);
            for _ in 0..=n {
                ranks.push(cur.u32()? as usize);
            }
            check_ranks(&dims, &ranks).map_err(|reason| FormatError::Inconsistent {
                offset: ranks_offset,
                reason,
            })?;
            let mut cores = Vec::with_capacity(n);
            for (k, &size) in dims.iter().enumerate() {
                let core_dims = vec![ranks[k], size, ranks[k + 1]];
                let len = core_dims.iter().product::<usize>();
                let raw = cur.take(len * 4)?;
                let data = raw
                    .chunks_exact(4)
                    .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
                    .collect();
                cores.push(DenseTensor::new(core_dims, data).expect("length matches dims"));
            }
            tokens.push(MpsCores::from_cores(cores).expect("ranks checked above"));
        }
        if cur.pos != bytes.len() {
            return Err(FormatError::Trailing {
                offset: cur.pos,
                extra: bytes.len() - cur.pos,
            });
        }
        Ok(Self {
            dims,
            epsilon,
            d,
            tokens,
            rank_caps: None,
        })
    }

    /// Embedding-layer accounting for this store, optionally with position
    /// rows and the parameter count of the whole model.
    pub fn layer_accounting(&self, extra: &AccountingExtras) -> LayerAccounting {
        let v = self.tokens.len() as u64;
        let d = self.d as u64;
        let token_params = self.compressed_params();
        // Position rows go through the same plan; charge them at this
        // store's mean per-token cost.
        let position_params = if v == 0 {
            extra.position_rows * d
        } else {
            ((token_params as f64 / v as f64) * extra.position_rows as f64).round() as u64
        };
        LayerAccounting::from_counts(
            (v + extra.position_rows) * d,
            token_params + position_params,
            extra.model_total_params,
        )
    }
}

fn check_ranks(dims: &[usize], ranks: &[usize]) -> Result<(), String> {
    let n = dims.len();
    if ranks[0] != 1 || ranks[n] != 1 {
        return Err(format!("boundary ranks must be 1, got {ranks:?}"));
    }
    for k in 1..n {
        let right: usize = dims[k..].iter().product();
        let bound = (ranks[k - 1] * dims[k - 1]).min(right);
        if ranks[k] == 0 || ranks[k] > bound {
            return Err(format!("rank r{k} = {} outside 1..={bound} in {ranks:?}", ranks[k]));
        }
    }
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, needed: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(needed).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(FormatError::Truncated {
                offset: self.pos,
                needed,
                available: self.bytes.len() - self.pos,
            }),
        }
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AccountingExtras {
    pub position_rows: u64,
    pub model_total_params: Option<u64>,
}

/// Parameter counts and ratios for an embedding block.
///
/// `eta` divides the savings by the compressed size, `eta_emb` by the
/// original size. Both are kept because they answer different questions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerAccounting {
    pub original_params: u64,
    pub compressed_params: u64,
    pub eta: f64,
    pub eta_emb: f64,
    pub model_total_params: Option<u64>,
    pub whole_model_reduction_fraction: Option<f64>,
}

impl LayerAccounting {
    pub fn from_counts(original: u64, compressed: u64, model_total_params: Option<u64>) -> Self {
        let saved = original as f64 - compressed as f64;
        let eta = if compressed == 0 {
            0.0
        } else {
            saved / compressed as f64
        };
        let eta_emb = if original == 0 { 0.0 } else { saved / original as f64 };
        let whole_model_reduction_fraction = model_total_params
            .filter(|&total| total > 0)
            .map(|total| saved / total as f64);
        Self {
            original_params: original,
            compressed_params: compressed,
            eta,
            eta_emb,
            model_total_params,
            whole_model_reduction_fraction,
        }
    }
}
