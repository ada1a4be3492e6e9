//! CSV and JSON artifacts with a metadata header.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, Format};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(v) => json!(v.to_string()),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
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
        Cell::Text(v.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// One output file worth of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra `key: value` lines for the header.
    pub notes: Vec<(String, String)>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&'static str]) -> Self {
        Self { name: name.into(), columns: columns.to_vec(), rows: Vec::new(), notes: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width for {}", self.name);
        self.rows.push(row);
    }

    pub fn note(&mut self, key: impl Into<String>, value: impl ToString) {
        self.notes.push((key.into(), value.to_string()));
    }

    /// Rows as CSV without the header block.
    pub fn data_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Run-level header fields.
#[derive(Clone, Debug)]
pub struct Metadata {
    pub experiment: String,
    pub seed: u64,
    pub threads: String,
    pub wall_time_s: f64,
    pub started_unix: u64,
    pub config: ExperimentConfig,
}

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn header(meta: &Metadata, table: &Table) -> String {
    let mut out = String::new();
    out.push_str(&format!("# {TOOL} {VERSION}\n"));
    out.push_str(&format!("# experiment: {}\n", meta.experiment));
    out.push_str(&format!("# table: {}\n", table.name));
    out.push_str(&format!("# seed: {}\n", meta.seed));
    out.push_str(&format!("# threads: {}\n", meta.threads));
    out.push_str(&format!("# started_unix: {}\n", meta.started_unix));
    out.push_str(&format!("# wall_time_s: {:.3}\n", meta.wall_time_s));
    for (k, v) in &table.notes {
        out.push_str(&format!("# {k}: {v}\n"));
    }
    out.push_str("# config:\n");
    for line in meta.config.to_toml().lines() {
        if line.is_empty() {
            out.push_str("#\n");
        } else {
            out.push_str(&format!("#   {line}\n"));
        }
    }
    out
}

fn json_doc(meta: &Metadata, table: &Table) -> Value {
    let notes: Map<String, Value> = table.notes.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    let rows: Vec<Value> = table.rows.iter().map(|r| Value::Array(r.iter().map(Cell::to_json).collect())).collect();
    json!({
        "metadata": {
            "tool": TOOL,
            "version": VERSION,
            "experiment": meta.experiment,
            "table": table.name,
            "seed": meta.seed,
            "threads": meta.threads,
            "started_unix": meta.started_unix,
            "wall_time_s": meta.wall_time_s,
            "notes": notes,
            "config": serde_json::to_value(&meta.config).expect("config serializes"),
        },
        "columns": table.columns,
        "rows": rows,
    })
}

/// Writes `table` as `<dir>/<name>.csv` and/or `.json`; returns the paths.
pub fn write_table(dir: &Path, table: &Table, meta: &Metadata, format: Format) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if format.csv() {
        let path = dir.join(format!("{}.csv", table.name));
        fs::write(&path, header(meta, table) + &table.data_csv()?)?;
        written.push(path);
    }
    if format.json() {
        let path = dir.join(format!("{}.json", table.name));
        let text = serde_json::to_string_pretty(&json_doc(meta, table)).map_err(|e| Error::Io(e.into()))?;
        fs::write(&path, text + "\n")?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn meta() -> Metadata {
        Metadata {
            experiment: "table1".into(),
            seed: 3,
            threads: "auto".into(),
            wall_time_s: 1.25,
            started_unix: 0,
            config: parse_config("").unwrap(),
        }
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new("demo", &["s", "value", "label"]);
        t.push(vec![0.5.into(), Cell::Empty, "a,b".into()]);
        t.note("argmax", "(0, 0)");
        let dir = tempfile::tempdir().unwrap();
        let paths = write_table(dir.path(), &t, &meta(), Format::Both).unwrap();
        assert_eq!(paths.len(), 2);
        let text = fs::read_to_string(&paths[0]).unwrap();
        assert!(text.starts_with("# qudit-sense"));
        assert!(text.contains("# seed: 3\n") && text.contains("# argmax: (0, 0)\n") && text.contains("#   n_sites = 4"));
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data, vec!["s,value,label", "0.5,,\"a,b\""]);
        let json: Value = serde_json::from_str(&fs::read_to_string(&paths[1]).unwrap()).unwrap();
        assert_eq!(json["rows"][0][1], Value::Null);
        assert_eq!(json["metadata"]["config"]["n_sites"], 4);
    }

    #[test]
    #[should_panic]
    fn ragged_rows_are_bugs() {
        let mut t = Table::new("demo", &["a", "b"]);
        t.push(vec![1.0.into()]);
    }
}
