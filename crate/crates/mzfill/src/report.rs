//! Deterministic CSV reports: fixed column order, header row, full float
//! precision, and an optional comment line embedding the invocation so a
//! report is reproducible from its own header.

use crate::error::{Error, Result};

/// A single report cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            // 17 significant digits round-trips any f64.
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

/// Renders rows against a schema. Every row must have exactly one cell per
/// column. An `invocation` line, when given, is embedded as a comment.
pub fn render_csv(schema: &[&str], rows: &[Vec<Cell>], invocation: Option<&str>) -> Result<String> {
    let mut out = String::new();
    if let Some(cmd) = invocation {
        out.push_str("# invocation: ");
        out.push_str(cmd);
        out.push('\n');
    }
    out.push_str(&schema.join(","));
    out.push('\n');
    for row in rows {
        if row.len() != schema.len() {
            return Err(Error::SchemaMismatch { expected: schema.len(), got: row.len() });
        }
        let line: Vec<String> = row.iter().map(Cell::render).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_rows_give_header_only() {
        let csv = render_csv(&["a", "b"], &[], None).unwrap();
        assert_eq!(csv, "a,b\n");
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let row = vec![Cell::from(1u64)];
        assert!(matches!(
            render_csv(&["a", "b"], &[row], None).unwrap_err(),
            Error::SchemaMismatch { expected: 2, got: 1 }
        ));
    }

    #[test]
    fn floats_round_trip_through_the_report() {
        let value = std::f64::consts::PI / 3.0;
        let csv = render_csv(&["x"], &[vec![Cell::from(value)]], None).unwrap();
        let printed = csv.lines().nth(1).unwrap();
        assert_eq!(printed.parse::<f64>().unwrap(), value);
    }

    #[test]
    fn invocation_comment_is_embedded() {
        let csv = render_csv(&["x"], &[], Some("gallery --kind circle --n 8")).unwrap();
        assert!(csv.starts_with("# invocation: gallery --kind circle --n 8\n"));
    }
}
