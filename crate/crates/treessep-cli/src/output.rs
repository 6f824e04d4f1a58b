//! CSV and NDJSON writers with deterministic formatting.

use std::fmt::Write as _;

/// RFC 4180 field quoting: wrap when the field holds a comma, quote, or
/// newline, doubling interior quotes.
pub fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') || s.contains('\r') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv_row(fields: &[String]) -> String {
    let mut row = String::new();
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            row.push(',');
        }
        let _ = write!(row, "{}", csv_field(f));
    }
    row.push('\n');
    row
}

/// Shortest round-trip decimal form; deterministic across runs.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub struct Table {
    out: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let fields: Vec<String> = header.iter().map(|s| s.to_string()).collect();
        Table {
            out: csv_row(&fields),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.out.push_str(&csv_row(fields));
    }

    pub fn finish(self) -> String {
        self.out
    }
}
