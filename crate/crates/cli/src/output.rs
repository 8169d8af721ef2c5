//! Tabular output files and their JSON sidecars.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Format;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Empty,
    Text(String),
    Int(i64),
    Num(f64),
    Bool(bool),
}

impl Cell {
    fn to_csv(&self) -> String {
        match self {
            Cell::Empty => String::new(),
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => x.to_string(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Empty => Value::Null,
            Cell::Text(s) => json!(s),
            Cell::Int(i) => json!(i),
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Num(_) => Value::Null,
            Cell::Bool(b) => json!(b),
        }
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

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<u64> for Cell {
    fn from(i: u64) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in {}", self.name);
        self.rows.push(row);
    }
}

/// Writes tables into one directory, each with a `<file>.meta.json` sidecar
/// holding the command name and its effective configuration.
pub struct OutputDir<'a, C: Serialize> {
    dir: PathBuf,
    format: Format,
    command: &'static str,
    config: &'a C,
    written: Vec<PathBuf>,
}

impl<'a, C: Serialize> OutputDir<'a, C> {
    pub fn create(dir: &Path, format: Format, command: &'static str, config: &'a C) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            command,
            config,
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, table: &Table) -> CliResult<PathBuf> {
        self.write_as(table, self.format)
    }

    pub fn write_as(&mut self, table: &Table, format: Format) -> CliResult<PathBuf> {
        let path = self.dir.join(format!("{}.{}", table.name, format.extension()));
        let bytes = match format {
            Format::Csv => csv_bytes(table).map_err(|e| CliError::io(&path, e))?,
            Format::Json => json_bytes(table),
        };
        self.write_file(&path, &bytes)?;
        self.sidecar(&path, format, &table.columns, table.rows.len())?;
        Ok(path)
    }

    /// Writes an already-serialized file and its sidecar.
    pub fn write_raw(&mut self, file_name: &str, bytes: &[u8], columns: &[&str], rows: usize) -> CliResult<PathBuf> {
        let path = self.dir.join(file_name);
        self.write_file(&path, bytes)?;
        let columns: Vec<String> = columns.iter().map(|c| c.to_string()).collect();
        self.sidecar(&path, Format::Csv, &columns, rows)?;
        Ok(path)
    }

    fn sidecar(&mut self, path: &Path, format: Format, columns: &[String], rows: usize) -> CliResult<()> {
        let meta = json!({
            "file": path.file_name().map(|f| f.to_string_lossy().into_owned()),
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "format": format,
            "columns": columns,
            "rows": rows,
            "config": self.config,
        });
        let mut text = serde_json::to_string_pretty(&meta).expect("serializable config");
        text.push('\n');
        let mut meta_path = path.as_os_str().to_owned();
        meta_path.push(".meta.json");
        self.write_file(Path::new(&meta_path), text.as_bytes())
    }

    fn write_file(&mut self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        f.write_all(bytes).map_err(|e| CliError::io(path, e))?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

fn csv_bytes(table: &Table) -> std::io::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::to_csv))?;
    }
    w.into_inner().map_err(|e| e.into_error())
}

fn json_bytes(table: &Table) -> Vec<u8> {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|r| Value::Array(r.iter().map(Cell::to_json).collect()))
        .collect();
    let doc = json!({ "columns": table.columns, "rows": rows });
    let mut bytes = serde_json::to_vec_pretty(&doc).expect("json table");
    bytes.push(b'\n');
    bytes
}

/// Fixed-width text rendering for terminal reports; numbers to 2 decimals.
pub fn render(table: &Table) -> String {
    let cells: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|c| match c {
                    Cell::Num(x) => format!("{x:.2}"),
                    Cell::Empty => "-".into(),
                    other => other.to_csv(),
                })
                .collect()
        })
        .collect();
    let widths: Vec<usize> = (0..table.columns.len())
        .map(|j| {
            cells
                .iter()
                .map(|r| r[j].len())
                .chain([table.columns[j].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |items: Vec<&str>| {
        items
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(j, (s, w))| if j == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(table.columns.iter().map(String::as_str).collect());
    out.push('\n');
    for r in &cells {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}
