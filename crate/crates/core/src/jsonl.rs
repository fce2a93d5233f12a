//! Line-delimited record files: one JSON object per line.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

/// Parses records from a reader; blank lines are skipped. `origin` is only
/// used in diagnostics.
pub fn read_records<T: DeserializeOwned, R: BufRead>(
    reader: R,
    origin: &str,
) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| JsonlError::Io {
            path: origin.to_string(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let rec = serde_json::from_str(trimmed).map_err(|e| JsonlError::Parse {
            path: origin.to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let origin = path.display().to_string();
    let file = File::open(path).map_err(|source| JsonlError::Io {
        path: origin.clone(),
        source,
    })?;
    read_records(BufReader::new(file), &origin)
}

pub fn write_records<T: Serialize, W: Write>(mut writer: W, records: &[T]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn write_file<T: Serialize>(path: &Path, records: &[T]) -> io::Result<()> {
    let file = File::create(path)?;
    write_records(io::BufWriter::new(file), records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_line_numbers() {
        let data = "{\"a\":1}\n\n{\"a\":\n";
        let err = read_records::<serde_json::Value, _>(data.as_bytes(), "x.jsonl").unwrap_err();
        match err {
            JsonlError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn skips_blank_lines() {
        let data = "1\n\n2\n";
        let v: Vec<u32> = read_records(data.as_bytes(), "-").unwrap();
        assert_eq!(v, vec![1, 2]);
    }
}
