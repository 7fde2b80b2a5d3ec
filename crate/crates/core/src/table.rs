//! Numeric tables with a schema tag and a config echo, written as CSV or JSON.
//!
//! CSV layout:
//! ```text
//! #schema=<name>/v1
//! #config=<one-line json>
//! col_a,col_b,...
//! 1.5,NaN,...
//! ```
//! Missing values are written as `NaN`. JSON carries the same content as
//! `{schema, config, columns, rows}` with missing values as `null`.

use std::io::{BufRead, Write};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub schema: String,
    pub config: Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn io_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Io(e.to_string())
}

impl Table {
    pub fn new(schema: &str, config: Value, columns: Vec<String>) -> Self {
        Self {
            schema: schema.to_string(),
            config,
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write<W: Write>(&self, format: Format, out: W) -> Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "#schema={}", self.schema).map_err(io_err)?;
        writeln!(out, "#config={}", self.config).map_err(io_err)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns).map_err(io_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).map_err(io_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self).map_err(io_err)?;
        writeln!(out).map_err(io_err)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut schema = String::new();
        let mut config = Value::Null;
        let mut body = String::new();
        for line in input.lines() {
            let line = line.map_err(io_err)?;
            if let Some(rest) = line.strip_prefix("#schema=") {
                schema = rest.trim().to_string();
            } else if let Some(rest) = line.strip_prefix("#config=") {
                config = serde_json::from_str(rest).map_err(|e| Error::Config(format!("bad config echo: {e}")))?;
            } else if !line.starts_with('#') {
                body.push_str(&line);
                body.push('\n');
            }
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let columns: Vec<String> = r.headers().map_err(io_err)?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(io_err)?;
            let row = rec
                .iter()
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Io(format!("bad number {f:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != columns.len() {
                return Err(Error::Io("ragged csv row".into()));
            }
            rows.push(row);
        }
        Ok(Self {
            schema,
            config,
            columns,
            rows,
        })
    }
}
