//! Deterministic JSON / CSV emission.

use crate::config::OutputFormat;
use crate::error::Result;
use crate::problem::Tolerances;
use crate::C64;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// C-style `%.12e`: `1.000000000000e+00`, locale independent.
pub fn fmt_e(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let s = format!("{x:.12e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

/// Metadata embedded in every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub subcommand: String,
    pub config_sha256: String,
    pub tolerances: Tolerances,
    pub m1: usize,
    pub m2: usize,
    pub seed: u64,
    pub crate_version: &'static str,
}

/// A table of rows, written as CSV (with `#` metadata lines) or as JSON.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Serialize for Cell {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Num(x) => s.serialize_f64(*x),
            Cell::Int(x) => s.serialize_i64(*x),
            Cell::Text(x) => s.serialize_str(x),
        }
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => fmt_e(*x),
            Cell::Int(x) => x.to_string(),
            Cell::Text(x) if x.contains([',', '"', '\n']) => format!("\"{}\"", x.replace('"', "\"\"")),
            Cell::Text(x) => x.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, meta: &Metadata) -> String {
        let mut out = String::new();
        let meta_json = serde_json::to_string(meta).expect("metadata serializes");
        let _ = writeln!(out, "# {meta_json}");
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    fn to_json_rows(&self) -> Vec<serde_json::Map<String, serde_json::Value>> {
        self.rows
            .iter()
            .map(|row| {
                self.columns
                    .iter()
                    .cloned()
                    .zip(row.iter().map(|c| serde_json::to_value(c).expect("cell serializes")))
                    .collect()
            })
            .collect()
    }
}

#[derive(Serialize)]
struct JsonDoc<'a, E: Serialize> {
    metadata: &'a Metadata,
    rows: Vec<serde_json::Map<String, serde_json::Value>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extra: Option<&'a E>,
}

/// Writes `name.json` or `name.csv` into `dir` and returns the path. In CSV
/// mode `extra` is written alongside as `name.extra.json` when present.
pub fn write_table<E: Serialize>(
    dir: &Path,
    name: &str,
    format: OutputFormat,
    meta: &Metadata,
    table: &Table,
    extra: Option<&E>,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    match format {
        OutputFormat::Json => {
            let path = dir.join(format!("{name}.json"));
            let doc = JsonDoc {
                metadata: meta,
                rows: table.to_json_rows(),
                extra,
            };
            let mut text = serde_json::to_string_pretty(&doc)?;
            text.push('\n');
            std::fs::write(&path, text)?;
            Ok(path)
        }
        OutputFormat::Csv => {
            let path = dir.join(format!("{name}.csv"));
            std::fs::write(&path, table.to_csv(meta))?;
            if let Some(e) = extra {
                let mut text = serde_json::to_string_pretty(e)?;
                text.push('\n');
                std::fs::write(dir.join(format!("{name}.extra.json")), text)?;
            }
            Ok(path)
        }
    }
}

/// Dense complex matrix as `(row, col, re, im)` rows.
pub fn matrix_table(m: &faer::Mat<C64>) -> Table {
    let mut t = Table::new(&["row", "col", "re", "im"]);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            t.push(vec![i.into(), j.into(), z.re.into(), z.im.into()]);
        }
    }
    t
}
