//! CSV and JSON writers with identical numeric content.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use merw::numfmt::{sig17, to_json};
use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::args::Format;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Int(v) => s.serialize_i64(*v),
            Cell::Float(v) => s.serialize_f64(*v),
        }
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => sig17(*v),
        }
    }
}

/// A rectangular table; JSON form is `{"columns": [...], "rows": [[...], ...]}`.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Table { columns, rows: Vec::new() }
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => json(self),
            Format::Csv => {
                let mut out = self.columns.join(",");
                out.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                Ok(out)
            }
        }
    }
}

pub fn json<T: Serialize + ?Sized>(value: &T) -> Result<String, CliError> {
    to_json(value).map_err(|e| CliError::Failed(format!("serialisation: {e}")))
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&key(k), v, out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), v, out);
            }
        }
        Value::Number(n) => {
            let text = match (n.as_i64(), n.as_u64(), n.as_f64()) {
                (Some(i), _, _) => i.to_string(),
                (_, Some(u), _) => u.to_string(),
                (_, _, Some(f)) => sig17(f),
                _ => n.to_string(),
            };
            out.push((prefix.to_string(), text));
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::Null => out.push((prefix.to_string(), String::new())),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// A nested document: pretty JSON, or `key,value` rows with dotted paths.
pub fn document<T: Serialize>(value: &T, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => json(value),
        Format::Csv => {
            let v = serde_json::to_value(value).map_err(|e| CliError::Failed(format!("serialisation: {e}")))?;
            let mut rows = Vec::new();
            flatten("", &v, &mut rows);
            let mut out = String::from("key,value\n");
            for (k, v) in rows {
                out.push_str(&csv_field(&k));
                out.push(',');
                out.push_str(&csv_field(&v));
                out.push('\n');
            }
            Ok(out)
        }
    }
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_carry_the_same_numbers() {
        let mut t = Table::new(vec!["n".into(), "x".into()]);
        t.rows.push(vec![Cell::Int(1), Cell::Float(0.1)]);
        let csv = t.render(Format::Csv).unwrap();
        assert_eq!(csv, "n,x\n1,1.0000000000000001e-1\n");
        let js = t.render(Format::Json).unwrap();
        assert!(js.contains("1.0000000000000001e-1"));
    }

    #[test]
    fn documents_flatten_to_dotted_keys() {
        let v = serde_json::json!({"a": {"b": [1, 2.5]}, "s": "x,y"});
        let csv = document(&v, Format::Csv).unwrap();
        assert_eq!(csv, "key,value\na.b.0,1\na.b.1,2.5000000000000000e0\ns,\"x,y\"\n");
    }
}
