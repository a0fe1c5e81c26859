//! Plain-text matrix I/O shared by dataset, checkpoint, and topology export.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::linalg::Matrix;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Fs {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl IoError {
    pub fn fs(path: &Path, source: std::io::Error) -> Self {
        IoError::Fs { path: path.display().to_string(), source }
    }
}

/// 17 significant digits; round-trips every finite `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for row in m.iter_rows() {
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<(), IoError> {
    fs::write(path, matrix_to_csv(m)).map_err(|e| IoError::fs(path, e))
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::fs(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| IoError::Parse { path: path.display().to_string(), line: lineno + 1, msg: e.to_string() })?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(IoError::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    msg: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    Ok(Matrix::from_rows(&rows))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| IoError::Json { path: path.display().to_string(), source: e })?;
    fs::write(path, text + "\n").map_err(|e| IoError::fs(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::fs(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::Json { path: path.display().to_string(), source: e })
}
