//! Tables, diagnostics and their CSV/JSON rendering.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::{Format, RunConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cx {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Cx {
    fn from(z: Complex64) -> Self {
        Cx { re: z.re, im: z.im }
    }
}

impl From<Cx> for Complex64 {
    fn from(z: Cx) -> Self {
        Complex64::new(z.re, z.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    /// Two CSV columns, `<name>_re` and `<name>_im`.
    Complex(Complex64),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<Complex64> for Cell {
    fn from(v: Complex64) -> Self {
        Cell::Complex(v)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn header(&self) -> Vec<String> {
        let Some(first) = self.rows.first() else {
            return self.columns.iter().map(|c| c.to_string()).collect();
        };
        let mut out = Vec::new();
        for (name, cell) in self.columns.iter().zip(first) {
            match cell {
                Cell::Complex(_) => {
                    out.push(format!("{name}_re"));
                    out.push(format!("{name}_im"));
                }
                _ => out.push(name.to_string()),
            }
        }
        out
    }

    fn json_rows(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut m = Map::new();
                for (name, cell) in self.columns.iter().zip(row) {
                    let v = match *cell {
                        Cell::Int(i) => Value::from(i),
                        Cell::Real(x) => Value::from(x),
                        Cell::Complex(z) => serde_json::to_value(Cx::from(z)).unwrap_or(Value::Null),
                    };
                    m.insert(name.to_string(), v);
                }
                Value::Object(m)
            })
            .collect();
        Value::Array(rows)
    }
}

/// Shortest round-trip text; exponent form away from order one.
fn fmt_real(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    /// A failing gating check makes the run exit with status 2.
    pub gating: bool,
}

impl Check {
    /// Passes when `value <= threshold`; NaN never passes.
    pub fn at_most(name: &str, value: f64, threshold: f64, gating: bool) -> Self {
        Check { name: name.into(), value, threshold, pass: value <= threshold, gating }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub tolerance: f64,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub table: Table,
    pub diagnostics: Diagnostics,
}

impl Report {
    pub fn exit_code(&self, strict: bool) -> i32 {
        let failed = self.diagnostics.checks.iter().any(|c| c.gating && !c.pass);
        if failed || (strict && !self.diagnostics.warnings.is_empty()) {
            2
        } else {
            0
        }
    }

    pub fn render(&self, cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
        match cfg.format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(self.table.header()).map_err(|e| CliError::Output(e.to_string()))?;
                for row in &self.table.rows {
                    let mut rec = Vec::with_capacity(row.len() + 2);
                    for cell in row {
                        match *cell {
                            Cell::Int(i) => rec.push(i.to_string()),
                            Cell::Real(x) => rec.push(fmt_real(x)),
                            Cell::Complex(z) => {
                                rec.push(fmt_real(z.re));
                                rec.push(fmt_real(z.im));
                            }
                        }
                    }
                    w.write_record(&rec).map_err(|e| CliError::Output(e.to_string()))?;
                }
                w.into_inner().map_err(|e| CliError::Output(e.to_string()))
            }
            Format::Json => {
                let doc = serde_json::json!({
                    "config": cfg,
                    "results": self.table.json_rows(),
                    "diagnostics": self.diagnostics,
                    "version": env!("CARGO_PKG_VERSION"),
                });
                let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Output(e.to_string()))?;
                out.push(b'\n');
                Ok(out)
            }
        }
    }

    /// Writes the rendered table to `--out` or stdout.
    pub fn emit(&self, cfg: &RunConfig) -> Result<(), CliError> {
        let bytes = self.render(cfg)?;
        match &cfg.out {
            Some(path) => std::fs::write(path, bytes)?,
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(&bytes)?;
                out.flush()?;
            }
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.diagnostics.checks {
            let tag = if c.pass { "ok" } else if c.gating { "FAIL" } else { "note" };
            s.push_str(&format!("[{tag}] {}: {:e} (threshold {:e})\n", c.name, c.value, c.threshold));
        }
        for w in &self.diagnostics.warnings {
            s.push_str(&format!("[warn] {w}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_columns_split_in_header() {
        let mut t = Table::new(&["n", "tau"]);
        t.push(vec![Cell::from(0usize), Cell::from(Complex64::new(0.5, -0.25))]);
        assert_eq!(t.header(), vec!["n", "tau_re", "tau_im"]);
        let rows = t.json_rows();
        assert_eq!(rows[0]["tau"]["im"], Value::from(-0.25));
    }

    #[test]
    fn nan_check_fails() {
        assert!(!Check::at_most("x", f64::NAN, 1.0, true).pass);
    }

    #[test]
    fn strict_promotes_warnings() {
        let r = Report {
            table: Table::default(),
            diagnostics: Diagnostics { tolerance: 1.0, checks: vec![], warnings: vec!["w".into()] },
        };
        assert_eq!(r.exit_code(false), 0);
        assert_eq!(r.exit_code(true), 2);
    }
}
