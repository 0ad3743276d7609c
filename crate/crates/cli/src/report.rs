//! Report emission. Every float leaves here rounded to 12 significant
//! digits, and non-finite values are spelled out as strings.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Map, Value};

pub const SIG_DIGITS: usize = 12;

/// Rounds to `SIG_DIGITS` significant digits; the shortest round-trip
/// representation of the result is exactly those digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().expect("formatted float parses")
}

fn non_finite(x: f64) -> &'static str {
    if x.is_nan() {
        "nan"
    } else if x > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::from(round_sig(x))
    } else {
        Value::from(non_finite(x))
    }
}

/// Text form shared by CSV cells.
pub fn num_text(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&round_sig(x)).expect("finite float serializes")
    } else {
        non_finite(x).to_string()
    }
}

fn round_tree(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => *v = num(n.as_f64().expect("f64 number")),
        Value::Array(items) => items.iter_mut().for_each(round_tree),
        Value::Object(map) => map.values_mut().for_each(round_tree),
        _ => {}
    }
}

pub fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

#[derive(Debug)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Debug)]
pub struct Report {
    pub command: String,
    pub params: Value,
    pub results: Value,
    pub diagnostics: Map<String, Value>,
    pub table: Table,
}

impl Report {
    pub fn json(&self) -> String {
        let mut v = json!({
            "command": self.command,
            "params": self.params,
            "results": self.results,
            "diagnostics": self.diagnostics,
        });
        round_tree(&mut v);
        let mut text = serde_json::to_string_pretty(&v).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::WriterBuilder::new().delimiter(b',').from_writer(Vec::new());
        w.write_record(&self.table.header)?;
        for row in &self.table.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub fn emit(text: &str, out: Option<&std::path::Path>) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}
