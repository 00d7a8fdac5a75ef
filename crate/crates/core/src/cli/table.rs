//! Result tables with bit-stable CSV and JSON serialization.
//!
//! Layout: optional `#`-prefixed provenance lines, a mandatory header row,
//! then data rows. Floats are rendered at 17 significant digits so that
//! parse -> emit round-trips are byte-identical.

use super::{CliError, CliResult};
use crate::util::fmt_float;
use std::fmt::Write as _;
use std::path::Path;

/// A single cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Text(_) => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_float(*x),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// Output format of [`ResultTable::render`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// A named table with a fixed column schema and provenance header.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// `(key, value)` provenance lines (tool version, config hash).
    pub provenance: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            provenance: vec![("tool".into(), format!("grnscale {}", env!("CARGO_PKG_VERSION")))],
        }
    }

    pub fn with_provenance(mut self, key: &str, value: String) -> Self {
        self.provenance.push((key.to_string(), value));
        self
    }

    /// Append a row. Non-finite numbers are rejected: tables carry an
    /// explicit status column instead of silent NaNs.
    pub fn push(&mut self, row: Vec<Cell>) -> CliResult<()> {
        if row.len() != self.columns.len() {
            return Err(CliError::Numeric(format!(
                "table {}: row width {} does not match {} columns",
                self.name,
                row.len(),
                self.columns.len()
            )));
        }
        for (cell, col) in row.iter().zip(&self.columns) {
            if let Cell::Num(x) = cell {
                if !x.is_finite() {
                    return Err(CliError::Numeric(format!(
                        "table {}: non-finite value in column {col}",
                        self.name
                    )));
                }
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.render_csv(),
            OutputFormat::Json => self.render_json(),
        }
    }

    fn render_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.provenance {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    fn render_json(&self) -> String {
        #[derive(serde::Serialize)]
        struct JsonTable<'a> {
            name: &'a str,
            provenance: Vec<(&'a str, &'a str)>,
            columns: &'a [String],
            rows: Vec<Vec<serde_json::Value>>,
        }
        let rows = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| match c {
                        Cell::Num(x) => serde_json::Value::String(fmt_float(*x)),
                        Cell::Text(s) => serde_json::Value::String(s.clone()),
                    })
                    .collect()
            })
            .collect();
        let table = JsonTable {
            name: &self.name,
            provenance: self
                .provenance
                .iter()
                .map(|(k, v)| (k.as_str(), v.as_str()))
                .collect(),
            columns: &self.columns,
            rows,
        };
        let mut s = serde_json::to_string_pretty(&table).expect("table serialization");
        s.push('\n');
        s
    }

    /// Parse the CSV layout produced by [`ResultTable::render`].
    pub fn parse_csv(name: &str, text: &str) -> CliResult<Self> {
        let mut provenance = Vec::new();
        let mut columns: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once(':') {
                    provenance.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            match &columns {
                None => columns = Some(line.split(',').map(|c| c.to_string()).collect()),
                Some(cols) => {
                    let cells: Vec<Cell> = line
                        .split(',')
                        .map(|c| match c.parse::<f64>() {
                            Ok(x) if looks_numeric(c) => Cell::Num(x),
                            _ => Cell::Text(c.to_string()),
                        })
                        .collect();
                    if cells.len() != cols.len() {
                        return Err(CliError::Validation {
                            path: name.to_string(),
                            message: format!("row width {} vs {} columns", cells.len(), cols.len()),
                        });
                    }
                    rows.push(cells);
                }
            }
        }
        let columns = columns.ok_or_else(|| CliError::Validation {
            path: name.to_string(),
            message: "missing header row".into(),
        })?;
        Ok(Self {
            name: name.to_string(),
            columns,
            rows,
            provenance,
        })
    }

    /// Write the table to `<dir>/<name>.<ext>`.
    pub fn write_to_dir(&self, dir: &Path, format: OutputFormat) -> CliResult<std::path::PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.{}", self.name, format.extension()));
        std::fs::write(&path, self.render(format))?;
        Ok(path)
    }
}

fn looks_numeric(s: &str) -> bool {
    s.bytes()
        .next()
        .is_some_and(|b| b.is_ascii_digit() || b == b'-' || b == b'+' || b == b'.')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_renders_header_only() {
        let t = ResultTable::new("empty", &["a", "b"]);
        let csv = t.render(OutputFormat::Csv);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# tool: grnscale"));
        assert_eq!(lines[1], "a,b");
        assert_eq!(lines.len(), 2);
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let mut t = ResultTable::new("rt", &["x", "label", "y"]);
        t.push(vec![1.0.into(), "stable".into(), (-std::f64::consts::PI / 17.0).into()])
            .unwrap();
        t.push(vec![
            (1.0 / 3.0).into(),
            "unstable".into(),
            f64::MIN_POSITIVE.into(),
        ])
        .unwrap();
        let csv = t.render(OutputFormat::Csv);
        let parsed = ResultTable::parse_csv("rt", &csv).unwrap();
        assert_eq!(parsed.render(OutputFormat::Csv), csv);
    }

    #[test]
    fn non_finite_rows_are_rejected() {
        let mut t = ResultTable::new("nf", &["x"]);
        assert!(t.push(vec![f64::NAN.into()]).is_err());
        assert!(t.push(vec![f64::INFINITY.into()]).is_err());
        assert!(t.push(vec![1.0.into()]).is_ok());
    }
}
