use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell values read as missing, compared case-insensitively. The empty
/// string is missing as well.
pub const MISSING_TOKENS: [&str; 3] = ["NA", "NaN", "null"];

pub fn is_missing_token(value: &str) -> bool {
    value.is_empty() || MISSING_TOKENS.iter().any(|t| t.eq_ignore_ascii_case(value))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    pub max_bytes: u64,
    /// Forces a delimiter instead of sniffing one.
    pub delimiter: Option<u8>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { max_bytes: 200 * 1024 * 1024, delimiter: None }
    }
}

/// A parsed delimited file, stored column-major. `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub path: String,
    pub headers: Vec<String>,
    pub columns: Vec<Vec<Option<String>>>,
}

impl Table {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.headers.len()
    }

    /// Parses in-memory bytes. `path` is only recorded for display.
    pub fn from_bytes(path: &str, bytes: &[u8], delimiter: Option<u8>) -> Result<Table> {
        let delimiter = delimiter.unwrap_or_else(|| detect_delimiter(bytes));
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .flexible(false)
            .from_reader(bytes);
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| ingest_err(&e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut columns: Vec<Vec<Option<String>>> = vec![Vec::new(); headers.len()];
        for record in reader.records() {
            let record = record.map_err(|e| ingest_err(&e))?;
            for (col, value) in columns.iter_mut().zip(record.iter()) {
                col.push((!is_missing_token(value)).then(|| value.to_string()));
            }
        }
        Ok(Table { path: path.to_string(), headers, columns })
    }
}

fn ingest_err(e: &csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::UnequalLengths { pos, expected_len, len } => Error::IngestLine {
            line: pos.as_ref().map_or(0, |p| p.line()),
            message: format!("expected {expected_len} fields, found {len}"),
        },
        _ => match e.position() {
            Some(pos) => Error::IngestLine { line: pos.line(), message: e.to_string() },
            None => Error::Ingest(e.to_string()),
        },
    }
}

/// Picks comma, semicolon or tab by looking at the first few lines.
///
/// A candidate scores its per-line count when that count is non-zero and the
/// same on every sampled line; ties and failures fall back to comma.
pub fn detect_delimiter(bytes: &[u8]) -> u8 {
    const CANDIDATES: [u8; 3] = [b',', b';', b'\t'];
    let lines: Vec<&[u8]> = bytes
        .split(|&b| b == b'\n')
        .map(|l| l.strip_suffix(b"\r").unwrap_or(l))
        .filter(|l| !l.is_empty())
        .take(10)
        .collect();
    let Some(header) = lines.first() else {
        return b',';
    };
    let count = |line: &[u8], d: u8| {
        let mut in_quotes = false;
        line.iter()
            .filter(|&&b| {
                if b == b'"' {
                    in_quotes = !in_quotes;
                }
                !in_quotes && b == d
            })
            .count()
    };
    let mut best = (b',', 0usize);
    for d in CANDIDATES {
        let n = count(header, d);
        if n == 0 || lines.iter().any(|l| count(l, d) != n) {
            continue;
        }
        if n > best.1 {
            best = (d, n);
        }
    }
    if best.1 > 0 {
        return best.0;
    }
    // Inconsistent everywhere (ragged input): go by the header alone.
    CANDIDATES
        .into_iter()
        .max_by_key(|&d| (count(header, d), d == b','))
        .filter(|&d| count(header, d) > 0)
        .unwrap_or(b',')
}

/// Reads a delimited text file with a header row.
pub fn ingest_csv(path: impl AsRef<Path>, options: &IngestOptions) -> Result<Table> {
    let path = path.as_ref();
    let meta = fs::metadata(path).map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
    if meta.len() > options.max_bytes {
        return Err(Error::Ingest(format!(
            "{} is {} bytes, over the {} byte limit",
            path.display(),
            meta.len(),
            options.max_bytes
        )));
    }
    let bytes = fs::read(path).map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
    Table::from_bytes(&path.display().to_string(), &bytes, options.delimiter)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_line_csv_with_trailing_missing() {
        let t = Table::from_bytes("t.csv", b"a,b\n1,2\n3,\n", None).unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.headers, vec!["a", "b"]);
        assert_eq!(t.columns[1], vec![Some("2".to_string()), None]);
    }

    #[test]
    fn semicolon_and_tab_match_comma() {
        let comma = Table::from_bytes("x", b"a,b,c\n1,x,\n2,y,NA\n", None).unwrap();
        let semi = Table::from_bytes("x", b"a;b;c\n1;x;\n2;y;NA\n", None).unwrap();
        let tab = Table::from_bytes("x", b"a\tb\tc\n1\tx\t\n2\ty\tNA\n", None).unwrap();
        assert_eq!(comma, semi);
        assert_eq!(comma, tab);
    }

    #[test]
    fn quoted_commas_do_not_confuse_sniffing() {
        let bytes = b"name;note\n\"Smith, J\";ok\n\"Doe, A\";fine\n";
        assert_eq!(detect_delimiter(bytes), b';');
    }

    #[test]
    fn extra_field_reports_line() {
        let err = Table::from_bytes("x", b"a,b\n1,2\n3,4,5\n", Some(b',')).unwrap_err();
        match err {
            Error::IngestLine { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_tokens_are_case_insensitive() {
        for v in ["", "na", "NA", "nan", "NaN", "NULL", "null"] {
            assert!(is_missing_token(v), "{v}");
        }
        for v in [" ", "N/A", "none", "0"] {
            assert!(!is_missing_token(v), "{v}");
        }
    }

    #[test]
    fn oversized_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("big.csv");
        fs::write(&p, "a\n1\n2\n3\n").unwrap();
        let err = ingest_csv(&p, &IngestOptions { max_bytes: 4, delimiter: None }).unwrap_err();
        assert!(matches!(err, Error::Ingest(_)));
        assert!(matches!(ingest_csv(dir.path().join("nope.csv"), &IngestOptions::default()), Err(Error::Ingest(_))));
    }
}
