//! Perplexity from externally scored token log-probabilities.
//!
//! `perplexity` is the plain inverse product of the token probabilities, with
//! no `1/|S|` exponent. The per-token variants are the conventional
//! normalized form and are opt-in.

use serde::Serialize;
use thiserror::Error;

/// Default soundness threshold on perplexity.
pub const DEFAULT_PPL_MAX: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("empty sequence")]
    Empty,
    #[error("token {index}: log-probability {value} is positive")]
    PositiveLogProb { index: usize, value: f64 },
    #[error("token {index}: probability 0 (log-probability -inf); clamp it to a small floor such as ln(1e-12) before scoring")]
    ZeroProbability { index: usize },
    #[error("token {index}: log-probability is NaN")]
    NotANumber { index: usize },
    #[error("sequence lengths differ: {base} vs {cmpr}")]
    LengthMismatch { base: usize, cmpr: usize },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Natural-log probabilities `ln p(x_i | x_1..x_{i-1})` of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSequence {
    logps: Vec<f64>,
}

impl ScoredSequence {
    pub fn new(logps: Vec<f64>) -> Result<Self, MetricsError> {
        if logps.is_empty() {
            return Err(MetricsError::Empty);
        }
        for (index, &value) in logps.iter().enumerate() {
            if value.is_nan() {
                return Err(MetricsError::NotANumber { index });
            }
            if value == f64::NEG_INFINITY {
                return Err(MetricsError::ZeroProbability { index });
            }
            if value > 0.0 {
                return Err(MetricsError::PositiveLogProb { index, value });
            }
        }
        Ok(Self { logps })
    }

    pub fn from_probs(probs: &[f64]) -> Result<Self, MetricsError> {
        Self::new(probs.iter().map(|p| p.ln()).collect())
    }

    pub fn logps(&self) -> &[f64] {
        &self.logps
    }

    pub fn len(&self) -> usize {
        self.logps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logps.is_empty()
    }

    /// Joins several sequences end to end.
    pub fn concat(seqs: &[ScoredSequence]) -> Result<Self, MetricsError> {
        Self::new(seqs.iter().flat_map(|s| s.logps.iter().copied()).collect())
    }
}

/// `-sum ln p`.
pub fn log_perplexity(s: &ScoredSequence) -> f64 {
    -s.logps.iter().sum::<f64>()
}

/// `(prod p)^-1`.
pub fn perplexity(s: &ScoredSequence) -> f64 {
    log_perplexity(s).exp()
}

/// Conventional per-token form, `-(1/|S|) sum ln p`. Not the product form.
pub fn log_perplexity_per_token(s: &ScoredSequence) -> f64 {
    log_perplexity(s) / s.len() as f64
}

pub fn perplexity_per_token(s: &ScoredSequence) -> f64 {
    log_perplexity_per_token(s).exp()
}

fn check_aligned(base: &ScoredSequence, cmpr: &ScoredSequence) -> Result<(), MetricsError> {
    if base.len() != cmpr.len() {
        return Err(MetricsError::LengthMismatch {
            base: base.len(),
            cmpr: cmpr.len(),
        });
    }
    Ok(())
}

/// Change in log-perplexity after compression; positive means worse.
pub fn delta_log_perplexity(base: &ScoredSequence, cmpr: &ScoredSequence) -> Result<f64, MetricsError> {
    check_aligned(base, cmpr)?;
    Ok(log_perplexity(cmpr) - log_perplexity(base))
}

/// The same quantity summed token by token as `sum ln(p_base / p_cmpr)`.
pub fn delta_log_perplexity_ratio_form(base: &ScoredSequence, cmpr: &ScoredSequence) -> Result<f64, MetricsError> {
    check_aligned(base, cmpr)?;
    Ok(base.logps.iter().zip(&cmpr.logps).map(|(b, c)| b - c).sum())
}

/// Parses the log-probability text format: one natural-log probability per
/// line, a blank line ends a sequence, `#` starts a comment line.
pub fn parse_logp_text(text: &str) -> Result<Vec<ScoredSequence>, MetricsError> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    let mut start_line = 1;
    let flush = |current: &mut Vec<f64>, out: &mut Vec<ScoredSequence>, start: usize| {
        if current.is_empty() {
            return Ok(());
        }
        let seq = ScoredSequence::new(std::mem::take(current)).map_err(|e| MetricsError::Parse {
            line: start,
            reason: format!("sequence starting here: {e}"),
        })?;
        out.push(seq);
        Ok(())
    };
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.starts_with('#') {
            continue;
        }
        if trimmed.is_empty() {
            flush(&mut current, &mut out, start_line)?;
            continue;
        }
        if current.is_empty() {
            start_line = i + 1;
        }
        let value: f64 = trimmed.parse().map_err(|e| MetricsError::Parse {
            line: i + 1,
            reason: format!("{trimmed:?}: {e}"),
        })?;
        if value == f64::NEG_INFINITY {
            return Err(MetricsError::Parse {
                line: i + 1,
                reason: MetricsError::ZeroProbability { index: current.len() }.to_string(),
            });
        }
        current.push(value);
    }
    flush(&mut current, &mut out, start_line)?;
    if out.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PplReport {
    pub n_tokens: usize,
    pub ppl: f64,
    pub ln_ppl: f64,
}

impl PplReport {
    pub fn literal(s: &ScoredSequence) -> Self {
        Self {
            n_tokens: s.len(),
            ppl: perplexity(s),
            ln_ppl: log_perplexity(s),
        }
    }

    pub fn per_token(s: &ScoredSequence) -> Self {
        Self {
            n_tokens: s.len(),
            ppl: perplexity_per_token(s),
            ln_ppl: log_perplexity_per_token(s),
        }
    }
}
