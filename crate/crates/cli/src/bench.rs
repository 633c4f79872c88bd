//! Latency harness. Only `tt_svd` and `reconstruct` are inside the timed
//! regions; reading input and building fixtures are not.

use std::time::Instant;

use serde::Serialize;
use ttembed::tt::{compression_ratio_ttd, reconstruct, tt_svd, MpsCores};

use crate::args::BenchArgs;
use crate::commands::{config, fixture, require_width};
use crate::error::CliError;
use crate::io::read_matrix_from;
use crate::json::emit;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyStats {
    pub samples: usize,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub min: f64,
    pub max: f64,
}

impl LatencyStats {
    /// Nearest-rank percentiles over `samples_ms`, which must be non-empty.
    pub fn from_samples(samples_ms: &[f64]) -> Self {
        let mut sorted = samples_ms.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let rank = |q: f64| sorted[((q * n as f64).ceil() as usize).clamp(1, n) - 1];
        Self {
            samples: n,
            mean: sorted.iter().sum::<f64>() / n as f64,
            p50: rank(0.50),
            p95: rank(0.95),
            min: sorted[0],
            max: sorted[n - 1],
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BenchProfile {
    pub source: String,
    pub tokens: usize,
    pub text_len: usize,
    pub d: usize,
    pub dims: Vec<usize>,
    pub rank_caps: Option<Vec<usize>>,
    pub epsilon: f64,
    pub mean_params_per_token: f64,
    pub eta_ttd: f64,
    pub compress_ms_per_token: LatencyStats,
    pub reconstruct_ms_per_token: LatencyStats,
    /// Reconstruction of `text_len` consecutive tokens.
    pub reconstruct_ms_per_text: LatencyStats,
}

fn elapsed_ms(start: Instant) -> f64 {
    // floor at the timer resolution so every sample is positive
    (start.elapsed().as_nanos().max(1)) as f64 / 1e6
}

pub fn bench(a: &BenchArgs) -> Result<(), CliError> {
    if a.tokens == 0 || a.text_len == 0 {
        return Err(CliError::Usage("--tokens and --text-len must be positive".into()));
    }
    let cfg = config(&a.decomposition)?;
    let (m, source) = match &a.input {
        Some(path) => (
            read_matrix_from(path, a.format, a.rows, a.dim)?.head(a.tokens),
            path.display().to_string(),
        ),
        None => (
            fixture(a.kind, a.tokens, &cfg.dims, a.seed),
            format!("synthetic:{:?}:seed={}", a.kind, a.seed).to_lowercase(),
        ),
    };
    if m.rows() == 0 {
        return Err(CliError::Usage("no rows to benchmark".into()));
    }
    require_width(&cfg.dims, m.cols())?;

    // warm-up, untimed
    let _ = reconstruct(&tt_svd(m.row(0), &cfg)?);

    let mut compress_ms = Vec::with_capacity(m.rows());
    let mut tokens: Vec<MpsCores> = Vec::with_capacity(m.rows());
    for row in m.iter_rows() {
        let start = Instant::now();
        let mps = tt_svd(row, &cfg)?;
        compress_ms.push(elapsed_ms(start));
        tokens.push(mps);
    }

    let mut reconstruct_ms = Vec::with_capacity(tokens.len());
    for mps in &tokens {
        let start = Instant::now();
        let row = reconstruct(mps);
        reconstruct_ms.push(elapsed_ms(start));
        std::hint::black_box(row);
    }

    let mut text_ms = Vec::new();
    for text in tokens.chunks(a.text_len) {
        let start = Instant::now();
        for mps in text {
            std::hint::black_box(reconstruct(mps));
        }
        text_ms.push(elapsed_ms(start));
    }

    let stored: usize = tokens.iter().map(MpsCores::param_count).sum();
    let profile = BenchProfile {
        source,
        tokens: tokens.len(),
        text_len: a.text_len,
        d: m.cols(),
        dims: cfg.dims.clone(),
        rank_caps: cfg.rank_caps.clone(),
        epsilon: cfg.epsilon,
        mean_params_per_token: stored as f64 / tokens.len() as f64,
        eta_ttd: compression_ratio_ttd(tokens.len() * m.cols(), stored),
        compress_ms_per_token: LatencyStats::from_samples(&compress_ms),
        reconstruct_ms_per_token: LatencyStats::from_samples(&reconstruct_ms),
        reconstruct_ms_per_text: LatencyStats::from_samples(&text_ms),
    };
    emit(&profile, a.output.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentiles() {
        let samples: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        let s = LatencyStats::from_samples(&samples);
        assert_eq!((s.p50, s.p95, s.min, s.max), (50.0, 95.0, 1.0, 100.0));
        assert_eq!(s.mean, 50.5);
        let one = LatencyStats::from_samples(&[3.0]);
        assert_eq!((one.p50, one.p95), (3.0, 3.0));
    }
}
