//! Columnar tables and flat key-value documents in CSV/TOML or JSON.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn table_ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }

    pub fn doc_ext(self) -> &'static str {
        match self {
            Format::Csv => "toml",
            Format::Json => "json",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
    I(i64),
    B(bool),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::U(v)
    }
}
impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::I(v)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

/// Shortest round-trip scientific notation; non-finite values spelled out.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:e}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F(v) => fmt_f64(*v),
            Cell::U(v) => v.to_string(),
            Cell::I(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
            Cell::S(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::S(s) => s.clone(),
        }
    }

    fn toml(&self) -> String {
        match self {
            Cell::F(v) if v.is_nan() => "nan".into(),
            Cell::F(v) if v.is_infinite() => if *v > 0.0 { "inf".into() } else { "-inf".into() },
            Cell::S(s) => Value::String(s.clone()).to_string(),
            other => other.csv(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::U(v) => Value::from(*v),
            Cell::I(v) => Value::from(*v),
            Cell::B(v) => Value::Bool(*v),
            Cell::S(s) => Value::String(s.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = self.columns.join(",");
                out.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                out
            }
            Format::Json => {
                let mut out = String::from("{\"columns\":");
                out.push_str(&serde_json::to_string(&self.columns).expect("strings serialize"));
                out.push_str(",\"rows\":[");
                for (k, row) in self.rows.iter().enumerate() {
                    if k > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    let vals: Vec<Value> = row.iter().map(Cell::json).collect();
                    out.push_str(&serde_json::to_string(&vals).expect("values serialize"));
                }
                out.push_str("\n]}\n");
                out
            }
        }
    }
}

/// Flat ordered document; dotted keys group related entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Doc {
    pub entries: Vec<(String, Cell)>,
}

impl Doc {
    pub fn new() -> Self {
        Doc::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<Cell>) -> &mut Self {
        self.entries.push((key.into(), value.into()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&Cell> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = String::new();
                for (k, v) in &self.entries {
                    let _ = writeln!(out, "{k} = {}", v.toml());
                }
                out
            }
            Format::Json => {
                let mut map = Map::new();
                for (k, v) in &self.entries {
                    map.insert(k.clone(), v.json());
                }
                let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("document serializes");
                s.push('\n');
                s
            }
        }
    }
}
