//! Deterministic CSV and JSON output. Every file opens with a provenance
//! header naming the tool version and the configuration hash.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub version: String,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>) -> Self {
        Provenance { version: crate::VERSION.to_string(), config_hash: config_hash.into() }
    }

    pub fn header_line(&self) -> String {
        format!("# treebec {} config-sha256 {}", self.version, self.config_hash)
    }
}

/// Round-trip-exact float text: 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => format_float(*x),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(if v { "true" } else { "false" }.into())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn render(&self, prov: &Provenance) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", prov.header_line());
        let _ = writeln!(s, "{}", self.columns.join(","));
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(Cell::render).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

pub fn write_csv(path: &Path, prov: &Provenance, table: &Table) -> Result<()> {
    std::fs::write(path, table.render(prov))?;
    Ok(())
}

/// JSON document `{"provenance": {...}, "payload": ...}`; keys sort, so output is stable.
pub fn render_json(prov: &Provenance, payload: serde_json::Value) -> String {
    let doc = serde_json::json!({
        "provenance": { "tool": "treebec", "version": prov.version, "configSha256": prov.config_hash },
        "payload": payload,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("json values serialise");
    s.push('\n');
    s
}

pub fn write_json(path: &Path, prov: &Provenance, payload: serde_json::Value) -> Result<()> {
    std::fs::write(path, render_json(prov, payload))?;
    Ok(())
}

/// A parsed CSV file: header comments, column names and raw cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCsv {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedCsv {
    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j].as_str()).collect())
    }

    pub fn float_column(&self, name: &str) -> Result<Vec<f64>> {
        let col = self
            .column(name)
            .ok_or_else(|| Error::Parse { line: 0, message: format!("no column `{name}`") })?;
        col.iter()
            .enumerate()
            .map(|(i, s)| {
                s.parse::<f64>().map_err(|e| Error::Parse { line: i + 1, message: format!("`{s}`: {e}") })
            })
            .collect()
    }
}

pub fn parse_csv(text: &str) -> Result<ParsedCsv> {
    let mut comments = Vec::new();
    let mut columns = None;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim().to_string());
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(str::to_string).collect();
        match &columns {
            None => columns = Some(cells),
            Some(cols) => {
                if cells.len() != cols.len() {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("expected {} cells, found {}", cols.len(), cells.len()),
                    });
                }
                rows.push(cells);
            }
        }
    }
    let columns = columns.ok_or_else(|| Error::Parse { line: 0, message: "no header row".into() })?;
    Ok(ParsedCsv { comments, columns, rows })
}
