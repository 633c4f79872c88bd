//! Training-free compression of token-embedding matrices with tensor-train
//! (matrix product state) decompositions.
//!
//! Each row of an embedding matrix is folded into an order-N tensor and
//! factorized with TT-SVD. The compressed vocabulary serializes to the TTEV1
//! format and reconstructs rows on demand.

pub mod analytics;
pub mod emb;
pub mod linalg;
pub mod metrics;
pub mod report;
pub mod synth;
pub mod tensor;
pub mod tt;
pub mod vocab;

pub use linalg::{frobenius_norm, trunc_svd, TruncatedSvd};
pub use tensor::{contract, matricize, tensorize, vectorize, DenseTensor};
pub use tt::{compression_ratio_ttd, param_count, reconstruct, tt_svd, MpsCores, TtConfig};
pub use vocab::{compress_vocabulary, CompressedVocabulary, LayerAccounting};
