use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::CliError;

/// Shortest decimal that parses back to the same binary64 value. Non-finite
/// values become an empty field.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        ryu::Buffer::new().format_finite(v).to_string()
    } else {
        String::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

/// Rectangular dataset written as CSV or as a JSON `{columns, rows}` object.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(v) => fmt_f64(*v),
                    Cell::Text(s) => s.clone(),
                    Cell::Empty => String::new(),
                })
                .collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                Value::Array(
                    row.iter()
                        .map(|c| match c {
                            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
                            Cell::Text(s) => Value::String(s.clone()),
                            Cell::Empty => Value::Null,
                        })
                        .collect(),
                )
            })
            .collect();
        serde_json::json!({ "columns": self.columns, "rows": rows })
    }
}

/// Writes files into one output directory, each through a `.partial`
/// sibling that is renamed into place once complete.
#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::output(format!("cannot create output directory {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn partial_path(&self, name: &str) -> PathBuf {
        self.root.join(format!("{name}.partial"))
    }

    /// Writes `name` atomically. With `complete == false` the data stays
    /// under `name.partial` and any older `name` is removed.
    pub fn write(&self, name: &str, bytes: &[u8], complete: bool) -> Result<PathBuf, CliError> {
        let partial = self.partial_path(name);
        let fail = |e: std::io::Error| CliError::output(format!("cannot write {}: {e}", partial.display()));
        let mut f = fs::File::create(&partial).map_err(fail)?;
        f.write_all(bytes).map_err(fail)?;
        f.sync_all().map_err(fail)?;
        drop(f);
        let target = self.path(name);
        if complete {
            fs::rename(&partial, &target)
                .map_err(|e| CliError::output(format!("cannot move {} into place: {e}", target.display())))?;
            Ok(target)
        } else {
            match fs::remove_file(&target) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(CliError::output(format!("cannot remove stale {}: {e}", target.display()))),
            }
            Ok(partial)
        }
    }

    pub fn write_json(&self, name: &str, value: &Value, complete: bool) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values serialise");
        text.push('\n');
        self.write(name, text.as_bytes(), complete)
    }
}
