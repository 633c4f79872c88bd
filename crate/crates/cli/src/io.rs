use std::fs;
use std::path::Path;

use ttembed::emb::{self, Dtype, EmbeddingMatrix};
use ttembed::metrics::{parse_logp_text, ScoredSequence};
use ttembed::vocab::CompressedVocabulary;

use crate::args::{MatrixFormat, MatrixInput};
use crate::error::CliError;

fn infer_format(path: &Path) -> MatrixFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => MatrixFormat::Csv,
        Some("raw" | "bin") => MatrixFormat::Raw,
        _ => MatrixFormat::Emb1,
    }
}

pub fn read_matrix_from(
    path: &Path,
    format: Option<MatrixFormat>,
    rows: Option<usize>,
    dim: Option<usize>,
) -> Result<EmbeddingMatrix, CliError> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    let wrap = |source| CliError::Matrix {
        path: path.to_path_buf(),
        source,
    };
    match format.unwrap_or_else(|| infer_format(path)) {
        MatrixFormat::Emb1 => emb::parse_emb1(&bytes).map_err(wrap),
        MatrixFormat::Csv => {
            let text = String::from_utf8(bytes)
                .map_err(|_| CliError::Usage(format!("{}: CSV input is not UTF-8", path.display())))?;
            emb::parse_csv(&text).map_err(wrap)
        }
        MatrixFormat::Raw => {
            let dim = dim.ok_or_else(|| CliError::Usage("raw input needs --dim".into()))?;
            if dim == 0 {
                return Err(CliError::Usage("--dim must be positive".into()));
            }
            // --rows is optional when the file length already pins it
            let rows = rows.unwrap_or(bytes.len() / (4 * dim));
            emb::parse_raw_f32(&bytes, rows, dim).map_err(wrap)
        }
    }
}

pub fn read_matrix(input: &MatrixInput) -> Result<EmbeddingMatrix, CliError> {
    read_matrix_from(&input.input, input.format, input.rows, input.dim)
}

/// EMB1 output is f64 so that reconstruction adds no rounding of its own.
pub fn write_matrix(path: &Path, format: MatrixFormat, m: &EmbeddingMatrix) -> Result<(), CliError> {
    let mut buf = Vec::new();
    let wrap = |source| CliError::Matrix {
        path: path.to_path_buf(),
        source,
    };
    match format {
        MatrixFormat::Emb1 => emb::write_emb1(m, Dtype::F64, &mut buf).map_err(wrap)?,
        MatrixFormat::Csv => emb::write_csv(m, &mut buf).map_err(wrap)?,
        MatrixFormat::Raw => {
            for &v in m.data() {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    fs::write(path, buf).map_err(CliError::io(path))
}

pub fn read_store(path: &Path) -> Result<CompressedVocabulary, CliError> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    CompressedVocabulary::from_bytes(&bytes).map_err(|source| CliError::Store {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_store(path: &Path, store: &CompressedVocabulary) -> Result<(), CliError> {
    fs::write(path, store.to_bytes()).map_err(CliError::io(path))
}

pub fn read_logp(path: &Path) -> Result<Vec<ScoredSequence>, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_logp_text(&text).map_err(|source| CliError::Logp {
        path: path.to_path_buf(),
        source,
    })
}
