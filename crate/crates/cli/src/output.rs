use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::{Command, Format, OutputArgs};
use crate::error::Result;

/// A table cell. Missing values print as an empty CSV field or JSON null.
#[derive(Clone, Debug)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        // no "-0.0" in tables
        Cell::Num(v + 0.0)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::from)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            // shortest representation that parses back to the same bits
            Cell::Num(v) => format!("{v:?}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => json!(v),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Missing => Value::Null,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(headers: &[&'static str]) -> Self {
        Table {
            headers: headers.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.headers)?;
        for row in &self.rows {
            out.write_record(row.iter().map(Cell::csv))?;
        }
        out.flush()?;
        Ok(())
    }

    fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> =
                    self.headers.iter().zip(row).map(|(h, c)| (h.to_string(), c.json())).collect();
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }
}

/// What a subcommand produces: a table plus summary values that go into
/// the JSON document and the sidecar.
#[derive(Debug)]
pub struct Report {
    pub table: Table,
    pub summary: Map<String, Value>,
    /// Set when some points failed but the rest are still written.
    pub failure: Option<phasesync::Error>,
}

impl Report {
    pub fn new(table: Table, summary: Map<String, Value>) -> Self {
        Report {
            table,
            summary,
            failure: None,
        }
    }
}

#[derive(Debug, Default)]
pub struct Timings(BTreeMap<String, f64>);

impl Timings {
    pub fn record<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = std::time::Instant::now();
        let out = f();
        *self.0.entry(name.to_owned()).or_default() += start.elapsed().as_secs_f64();
        out
    }

    pub fn set(&mut self, name: &str, seconds: f64) {
        self.0.insert(name.to_owned(), seconds);
    }

    fn to_json(&self) -> Value {
        json!(self.0)
    }
}

pub fn sidecar_path(output: &OutputArgs) -> Option<PathBuf> {
    output.sidecar.clone().or_else(|| {
        output.out.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".meta.json");
            PathBuf::from(s)
        })
    })
}

fn open(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_report(report: Report, config: &Command, timings: &Timings) -> Result<()> {
    let mut config = config.clone();
    let output = config.output_mut().expect("runnable command").clone();
    let mut w = open(output.out.as_deref())?;
    match output.format {
        Format::Csv => report.table.write_csv(&mut w)?,
        Format::Json => {
            let mut doc = report.summary.clone();
            doc.insert("data".into(), report.table.to_json());
            serde_json::to_writer_pretty(&mut w, &Value::Object(doc))?;
            writeln!(w)?;
        }
    }
    w.flush()?;

    if let Some(path) = sidecar_path(&output) {
        let mut meta = Map::new();
        meta.insert("config".into(), serde_json::to_value(&config)?);
        meta.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        meta.insert("timings".into(), timings.to_json());
        for (k, v) in &report.summary {
            meta.entry(k.clone()).or_insert_with(|| v.clone());
        }
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, &Value::Object(meta))?;
        writeln!(f)?;
        f.flush()?;
    }
    match report.failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}
