//! Minimal numeric CSV: one header line, comma-separated `f64` columns.
//! Errors carry 1-based line numbers so callers can point at the bad row.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TableError {
    #[error("empty input: expected a header line")]
    Empty,
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column `{column}`: cannot parse `{text}` as a number")]
    Parse {
        line: usize,
        column: String,
        text: String,
    },
    #[error("line {line}, column `{column}`: non-finite value")]
    NonFinite { line: usize, column: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    /// Source line number of each data row.
    pub lines: Vec<usize>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut rows = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, header_line) = rows.next().ok_or(TableError::Empty)?;
        let header: Vec<String> = header_line.split(',').map(|s| s.trim().to_string()).collect();
        let mut columns = vec![Vec::new(); header.len()];
        let mut lines = Vec::new();
        for (line, row) in rows {
            let fields: Vec<&str> = row.split(',').map(str::trim).collect();
            if fields.len() != header.len() {
                return Err(TableError::FieldCount {
                    line,
                    expected: header.len(),
                    found: fields.len(),
                });
            }
            for (k, f) in fields.iter().enumerate() {
                let v: f64 = f.parse().map_err(|_| TableError::Parse {
                    line,
                    column: header[k].clone(),
                    text: f.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(TableError::NonFinite {
                        line,
                        column: header[k].clone(),
                    });
                }
                columns[k].push(v);
            }
            lines.push(line);
        }
        Ok(Self {
            header,
            columns,
            lines,
        })
    }

    pub fn has(&self, name: &str) -> bool {
        self.header.iter().any(|h| h == name)
    }

    pub fn column(&self, name: &str) -> Result<&[f64], TableError> {
        self.header
            .iter()
            .position(|h| h == name)
            .map(|k| self.columns[k].as_slice())
            .ok_or_else(|| TableError::MissingColumn(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }
}

/// Writes columns under `header`. Values use Rust's shortest round-trip
/// formatting so output is byte-stable for identical inputs.
pub fn write_csv(header: &[&str], columns: &[&[f64]]) -> String {
    let n = columns.first().map_or(0, |c| c.len());
    let mut out = String::with_capacity(32 * n * columns.len().max(1));
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..n {
        for (k, c) in columns.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:e}", c[i]);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments_and_blank_lines() {
        let t = Table::parse("# note\nx,y\n1,2\n\n3,4e-3\n").unwrap();
        assert_eq!(t.header, vec!["x", "y"]);
        assert_eq!(t.column("y").unwrap(), &[2.0, 4e-3]);
        assert_eq!(t.lines, vec![3, 5]);
    }

    #[test]
    fn reports_line_numbers() {
        let err = Table::parse("x,y\n1,2\n3,oops\n").unwrap_err();
        assert_eq!(
            err,
            TableError::Parse {
                line: 3,
                column: "y".into(),
                text: "oops".into()
            }
        );
        let err = Table::parse("x,y\n1,2,3\n").unwrap_err();
        assert!(matches!(err, TableError::FieldCount { line: 2, .. }));
        assert!(err.to_string().starts_with("line 2"));
        assert!(matches!(
            Table::parse("x\nNaN\n").unwrap_err(),
            TableError::NonFinite { line: 2, .. }
        ));
        assert_eq!(Table::parse("").unwrap_err(), TableError::Empty);
    }

    #[test]
    fn write_then_parse_is_exact() {
        let a = [0.1, 1.0 / 3.0, -2.5e-300];
        let b = [1e300, std::f64::consts::PI, 0.0];
        let text = write_csv(&["a", "b"], &[&a, &b]);
        let t = Table::parse(&text).unwrap();
        assert_eq!(t.column("a").unwrap(), &a);
        assert_eq!(t.column("b").unwrap(), &b);
    }
}
