//! Report assembly and emission as JSON or CSV.

use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// A CSV cell; numbers are formatted like their JSON counterparts.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Count(usize),
    Bool(bool),
    Text(String),
    Empty,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    /// Top-level JSON object, keys in insertion order.
    pub body: Map<String, Value>,
    pub table: Table,
}

/// Round to 15 significant digits; non-finite values have no JSON form.
pub fn round15(x: f64) -> Option<f64> {
    if !x.is_finite() {
        return None;
    }
    if x == 0.0 {
        return Some(0.0);
    }
    format!("{x:.14e}").parse().ok()
}

pub fn num(x: f64) -> Value {
    round15(x)
        .and_then(serde_json::Number::from_f64)
        .map_or(Value::Null, Value::Number)
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|x| num(*x)).collect())
}

fn normalize(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if let Some(f) = n.as_f64().filter(|_| !n.is_i64() && !n.is_u64()) {
                *v = num(f);
            }
        }
        Value::Array(a) => a.iter_mut().for_each(normalize),
        Value::Object(o) => o.values_mut().for_each(normalize),
        _ => {}
    }
}

fn cell_text(c: &Cell) -> String {
    match c {
        Cell::Num(x) => match num(*x) {
            Value::Null => String::new(),
            v => v.to_string(),
        },
        Cell::Count(n) => n.to_string(),
        Cell::Bool(b) => b.to_string(),
        Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Cell::Text(s) => s.clone(),
        Cell::Empty => String::new(),
    }
}

pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Json => {
            let mut v = Value::Object(report.body.clone());
            normalize(&mut v);
            let mut s = serde_json::to_string_pretty(&v).expect("JSON values always serialise");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = report.table.header.join(",");
            s.push('\n');
            for row in &report.table.rows {
                s.push_str(&row.iter().map(cell_text).collect::<Vec<_>>().join(","));
                s.push('\n');
            }
            s
        }
    }
}

/// Write the rendered report to `path`, or stdout when `path` is `None`.
pub fn emit_report(report: &Report, format: Format, path: Option<&Path>) -> Result<(), CliError> {
    let text = render(report, format);
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}")))
        }
    }
}
