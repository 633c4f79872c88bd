//! Dense embedding matrices and their on-disk forms.
//!
//! EMB1 layout, little-endian: magic `EMB1`, version u32 = 1, dtype u8
//! (0 = f32, 1 = f64), 3 reserved bytes, rows u64, cols u64, then the values
//! row-major. Headerless raw f32 and CSV (one row per line) are also read.

use std::io::{Read, Write};

use thiserror::Error;

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
pub const EMB1_VERSION: u32 = 1;
const EMB1_HEADER_LEN: usize = 28;

#[derive(Debug, Error)]
pub enum EmbError {
    #[error("bad magic at offset 0: expected \"EMB1\", found {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported EMB1 version {found} at offset 4")]
    Version { found: u32 },
    #[error("unsupported dtype {found} at offset 8")]
    Dtype { found: u8 },
    #[error("truncated stream: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("{extra} trailing bytes after matrix data at offset {offset}")]
    Trailing { offset: usize, extra: usize },
    #[error("raw input has {len} bytes, expected {rows} x {cols} f32 = {expected}")]
    RawSize {
        len: usize,
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("csv line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error("matrix data has {len} values, expected {rows} x {cols}")]
    Shape { rows: usize, cols: usize, len: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Element type used when writing EMB1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 0,
    F64 = 1,
}

/// A `rows x cols` real matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, EmbError> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(EmbError::Shape {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, EmbError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.as_ref().len() != cols {
                return Err(EmbError::Csv {
                    line: i + 1,
                    reason: format!("row has {} values, expected {cols}", row.as_ref().len()),
                });
            }
            data.extend_from_slice(row.as_ref());
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    /// First `n` rows (or all of them).
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.rows);
        Self {
            rows: n,
            cols: self.cols,
            data: self.data[..n * self.cols].to_vec(),
        }
    }

    /// First non-finite entry as `(row, col)`.
    pub fn find_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| (i / self.cols, i % self.cols))
    }
}

pub fn write_emb1<W: Write>(m: &EmbeddingMatrix, dtype: Dtype, mut w: W) -> Result<(), EmbError> {
    let mut buf = Vec::with_capacity(EMB1_HEADER_LEN + m.data.len() * 8);
    buf.extend_from_slice(EMB1_MAGIC);
    buf.extend_from_slice(&EMB1_VERSION.to_le_bytes());
    buf.push(dtype as u8);
    buf.extend_from_slice(&[0; 3]);
    buf.extend_from_slice(&(m.rows as u64).to_le_bytes());
    buf.extend_from_slice(&(m.cols as u64).to_le_bytes());
    match dtype {
        Dtype::F32 => {
            for &v in &m.data {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Dtype::F64 => {
            for &v in &m.data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

fn take(bytes: &[u8], offset: usize, needed: usize) -> Result<&[u8], EmbError> {
    bytes.get(offset..offset + needed).ok_or(EmbError::Truncated {
        offset,
        needed,
        available: bytes.len().saturating_sub(offset),
    })
}

pub fn parse_emb1(bytes: &[u8]) -> Result<EmbeddingMatrix, EmbError> {
    let magic: [u8; 4] = take(bytes, 0, 4)?.try_into().unwrap();
    if &magic != EMB1_MAGIC {
        return Err(EmbError::BadMagic(magic));
    }
    let version = u32::from_le_bytes(take(bytes, 4, 4)?.try_into().unwrap());
    if version != EMB1_VERSION {
        return Err(EmbError::Version { found: version });
    }
    let dtype = take(bytes, 8, 1)?[0];
    let width = match dtype {
        0 => 4,
        1 => 8,
        found => return Err(EmbError::Dtype { found }),
    };
    take(bytes, 9, 3)?;
    let rows = u64::from_le_bytes(take(bytes, 12, 8)?.try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(take(bytes, 20, 8)?.try_into().unwrap()) as usize;
    let count = rows.saturating_mul(cols);
    let payload = take(bytes, EMB1_HEADER_LEN, count.saturating_mul(width))?;
    let end = EMB1_HEADER_LEN + payload.len();
    if end != bytes.len() {
        return Err(EmbError::Trailing {
            offset: end,
            extra: bytes.len() - end,
        });
    }
    let data = if width == 4 {
        payload
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
            .collect()
    } else {
        payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    EmbeddingMatrix::new(rows, cols, data)
}

pub fn read_emb1<R: Read>(mut r: R) -> Result<EmbeddingMatrix, EmbError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    parse_emb1(&bytes)
}

/// Headerless little-endian f32, row-major.
pub fn parse_raw_f32(bytes: &[u8], rows: usize, cols: usize) -> Result<EmbeddingMatrix, EmbError> {
    let expected = rows * cols * 4;
    if bytes.len() != expected {
        return Err(EmbError::RawSize {
            len: bytes.len(),
            rows,
            cols,
            expected,
        });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    EmbeddingMatrix::new(rows, cols, data)
}

/// One row per line, comma separated. Blank lines and `#` lines are skipped.
pub fn parse_csv(text: &str) -> Result<EmbeddingMatrix, EmbError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut cols = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| EmbError::Csv {
                    line: i + 1,
                    reason: format!("{:?}: {e}", f.trim()),
                })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(EmbError::Csv {
                    line: i + 1,
                    reason: format!("row has {} values, expected {c}", row.len()),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    let cols = cols.unwrap_or(0);
    let data = rows.concat();
    EmbeddingMatrix::new(data.len().checked_div(cols).unwrap_or(0), cols, data)
}

pub fn write_csv<W: Write>(m: &EmbeddingMatrix, mut w: W) -> Result<(), EmbError> {
    for row in m.iter_rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}
