//! Report types and the CSV table format.
//!
//! Every CSV starts with a marker line
//! `# lagmax-csv schema_version=1 kind=<kind>` followed by an ordinary header
//! row. Floats are written as `{:.12e}` so identical runs give identical bytes.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fit::LineFit;

pub const CSV_SCHEMA_VERSION: u32 = 1;
const CSV_MARKER: &str = "# lagmax-csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Num(v) => format!("{v:.12e}"),
            Value::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Int(v as i64)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

/// One CSV sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub kind: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(kind: &str, columns: &[&str]) -> Self {
        Self { kind: kind.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match table `{}`", self.kind);
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{CSV_MARKER} schema_version={CSV_SCHEMA_VERSION} kind={}", self.kind)?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&self.columns)?;
        for row in &self.rows {
            csv.write_record(row.iter().map(Value::render))?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Reads a table written by [`Table::write`], rejecting a missing marker
    /// or a different schema version. Cells come back as numbers where they
    /// parse and as text otherwise.
    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut first = String::new();
        r.read_line(&mut first)?;
        let rest = first
            .trim_end()
            .strip_prefix(CSV_MARKER)
            .ok_or_else(|| Error::Config("missing lagmax-csv marker line".into()))?;
        let mut version = None;
        let mut kind = None;
        for kv in rest.split_whitespace() {
            match kv.split_once('=') {
                Some(("schema_version", v)) => version = v.parse::<u32>().ok(),
                Some(("kind", v)) => kind = Some(v.to_string()),
                _ => {}
            }
        }
        if version != Some(CSV_SCHEMA_VERSION) {
            return Err(Error::Config(format!("csv schema version {version:?}, expected {CSV_SCHEMA_VERSION}")));
        }
        let kind = kind.ok_or_else(|| Error::Config("csv marker lacks kind".into()))?;
        let mut csv = csv::Reader::from_reader(r);
        let columns: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in csv.records() {
            let rec = rec?;
            rows.push(
                rec.iter()
                    .map(|cell| {
                        if let Ok(i) = cell.parse::<i64>() {
                            Value::Int(i)
                        } else if let Ok(v) = cell.parse::<f64>() {
                            Value::Num(v)
                        } else {
                            Value::Text(cell.to_string())
                        }
                    })
                    .collect(),
            );
        }
        Ok(Self { kind, columns, rows })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    /// Human-readable acceptance rule, e.g. `<= 1e-6`.
    pub rule: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

/// A constant fitted as the min (`lower`) or max (`upper`) ratio over a cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedConstant {
    pub name: String,
    pub value: f64,
    pub side: Side,
    /// Definition of the sample cloud the constant was fitted on.
    pub cloud: String,
    pub samples: usize,
    /// Value refitted on a second cloud, when one was used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refit: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub name: String,
    pub x: String,
    pub y: String,
    pub fit: LineFit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetUsage {
    pub mc_samples: usize,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRef {
    pub kind: String,
    pub file: String,
    pub rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: String,
    /// Plain-words statement of what the scenario demonstrates.
    pub verifies: String,
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    pub constants: Vec<FittedConstant>,
    pub regressions: Vec<Regression>,
    pub tables: Vec<TableRef>,
    pub warnings: Vec<String>,
    pub budget: BudgetUsage,
    /// The wall-clock budget ran out; the report is partial.
    pub budget_exceeded: bool,
    pub passed: bool,
}

impl ExperimentReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// A finished run: the report plus its CSV tables, not yet on disk.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub tables: Vec<Table>,
}

impl RunOutput {
    /// Writes `<scenario>-<kind>.csv` per table and `<scenario>.json`.
    pub fn write_to(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (t, r) in self.tables.iter().zip(&self.report.tables) {
            t.write(std::fs::File::create(dir.join(&r.file))?)?;
        }
        let json = serde_json::to_string_pretty(&self.report)?;
        std::fs::write(dir.join(format!("{}.json", self.report.scenario)), json + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_and_format() {
        let mut t = Table::new("demo", &["lambda", "measure", "label"]);
        t.push(vec![0.5.into(), 1.0e-7.into(), "a,b".into()]);
        t.push(vec![2.0.into(), 3usize.into(), "c".into()]);
        let s = t.to_csv_string().unwrap();
        assert!(s.starts_with("# lagmax-csv schema_version=1 kind=demo\nlambda,measure,label\n"));
        assert!(s.contains("5.000000000000e-1,1.000000000000e-7,\"a,b\""));
        let back = Table::read(s.as_bytes()).unwrap();
        assert_eq!(back.kind, "demo");
        assert_eq!(back.rows[1][1], Value::Int(3));
        assert_eq!(back.rows[0][0], Value::Num(0.5));
    }

    #[test]
    fn csv_reader_rejects_other_versions() {
        assert!(Table::read("lambda\n1\n".as_bytes()).is_err());
        assert!(Table::read("# lagmax-csv schema_version=2 kind=x\nl\n1\n".as_bytes()).is_err());
    }
}
