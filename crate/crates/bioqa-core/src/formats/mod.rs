//! Readers and writers for the on-disk JSON schemas.
//!
//! Three formats are handled:
//!
//! - BioASQ Phase-B question files (`{"questions": [...]}`), read and
//!   written.
//! - SQuAD v1.1-shaped datasets, read and written byte-stably (v2.0 files
//!   with `is_impossible` entries are accepted read-only).
//! - Prediction files keyed by question id, mirroring BioASQ submission
//!   content.

pub mod bioasq;
pub mod predictions;
pub mod squad;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON at byte {offset} (line {line}, column {column}): {message}")]
    Json {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error in question {index}: {message}")]
    Schema { index: usize, message: String },
    #[error("prediction for '{id}' has {len} candidates; BioASQ allows 1 to 5 factoid answers")]
    FactoidLimit { id: String, len: usize },
    #[error("duplicate prediction id '{id}'")]
    DuplicateId { id: String },
    #[error("{0}")]
    Invalid(String),
}

/// Maps a serde_json syntax error to [`FormatError::Json`], recovering the
/// byte offset of the failure from the reported line/column.
pub(crate) fn json_error(bytes: &[u8], err: &serde_json::Error) -> FormatError {
    let line = err.line();
    let column = err.column();
    let offset = byte_offset(bytes, line, column);
    FormatError::Json {
        offset,
        line,
        column,
        message: err.to_string(),
    }
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut current_line = 1usize;
    let mut line_start = 0usize;
    if line > 1 {
        for (i, b) in bytes.iter().enumerate() {
            if *b == b'\n' {
                current_line += 1;
                if current_line == line {
                    line_start = i + 1;
                    break;
                }
            }
        }
    }
    (line_start + column.saturating_sub(1)).min(bytes.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_error_reports_byte_offset() {
        let bytes = b"{\"questions\": [\n  {broken}\n]}";
        let err = serde_json::from_slice::<serde_json::Value>(bytes).unwrap_err();
        let mapped = json_error(bytes, &err);
        match mapped {
            FormatError::Json { offset, line, .. } => {
                assert_eq!(line, 2);
                assert_eq!(bytes[offset], b'b');
            }
            other => panic!("expected Json error, got {other:?}"),
        }
    }
}
