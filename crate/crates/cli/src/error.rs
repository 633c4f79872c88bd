use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;
use ttembed::analytics::{AnalyticsError, SearchReport};
use ttembed::emb::EmbError;
use ttembed::metrics::MetricsError;
use ttembed::tt::TtError;
use ttembed::vocab::{FormatError, VocabError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Matrix { path: PathBuf, source: EmbError },
    #[error("{path}: {source}")]
    Store { path: PathBuf, source: FormatError },
    #[error("{path}: {source}")]
    Logp { path: PathBuf, source: MetricsError },
    #[error(transparent)]
    Config(#[from] TtError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("no evaluated plan meets the constraints")]
    Infeasible(Box<SearchReport>),
}

impl CliError {
    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |source| Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Io { .. } => "io",
            Self::Matrix { .. } => "matrix_format",
            Self::Store { .. } => "store_format",
            Self::Logp { .. } => "logp_format",
            Self::Config(_) => "config",
            Self::Vocab(_) => "compression",
            Self::Analytics(_) => "analytics",
            Self::Metrics(_) => "metrics",
            Self::Infeasible(_) => "infeasible",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Infeasible(_) => 3,
            _ => 1,
        }
    }

    /// The object written to stderr on failure.
    pub fn to_json(&self) -> serde_json::Value {
        let mut body = json!({
            "kind": self.kind(),
            "message": self.to_string(),
        });
        match self {
            Self::Io { path, .. } | Self::Matrix { path, .. } | Self::Store { path, .. } | Self::Logp { path, .. } => {
                body["path"] = json!(path.display().to_string());
            }
            Self::Infeasible(report) => {
                body["best"] = crate::json::finalize(json!(report.best()));
            }
            _ => {}
        }
        json!({ "error": body })
    }
}
