//! One-hot expansion of categorical CSV columns.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};

/// String table as read from a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    /// Reads a CSV file. Without a header row the columns are named `c0`, `c1`, ...
    pub fn read(path: impl AsRef<Path>, has_header: bool) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::ReaderBuilder::new()
            .has_headers(has_header)
            .trim(csv::Trim::All)
            .from_reader(file);
        let mut rows = Vec::new();
        let mut width = None;
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let w = *width.get_or_insert(rec.len());
            if rec.len() != w {
                return Err(Error::MalformedRow {
                    line,
                    message: format!("expected {w} fields, found {}", rec.len()),
                });
            }
            rows.push(rec.iter().map(String::from).collect::<Vec<_>>());
        }
        let headers = if has_header {
            r.headers()?.iter().map(String::from).collect()
        } else {
            (0..width.unwrap_or(0)).map(|j| format!("c{j}")).collect()
        };
        Ok(Self { headers, rows })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct EncodeOptions {
    /// Columns copied verbatim (ids, labels, survival times/events).
    pub passthrough: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodeSummary {
    pub categorical_columns: usize,
    pub numeric_columns: usize,
    pub dummy_columns: usize,
}

/// Expands every non-numeric column into 0/1 dummies named `column=value`,
/// one per distinct value in lexicographic order. Passthrough columns come
/// first, then the remaining columns in their original order.
pub fn one_hot(table: &RawTable, opts: &EncodeOptions) -> Result<(RawTable, EncodeSummary)> {
    for p in &opts.passthrough {
        if !table.headers.contains(p) {
            return Err(Error::Schema(format!("column `{p}` not found")));
        }
    }
    let keep: Vec<usize> = opts
        .passthrough
        .iter()
        .map(|p| table.headers.iter().position(|h| h == p).expect("checked"))
        .collect();

    enum Plan {
        Numeric(usize),
        Categorical(usize, Vec<String>),
    }
    let mut plans = Vec::new();
    for (j, _) in table.headers.iter().enumerate().filter(|(j, _)| !keep.contains(j)) {
        let numeric = !table.rows.is_empty() && table.rows.iter().all(|r| r[j].parse::<f64>().is_ok());
        if numeric {
            plans.push(Plan::Numeric(j));
        } else {
            let cats: BTreeSet<&str> = table.rows.iter().map(|r| r[j].as_str()).collect();
            plans.push(Plan::Categorical(j, cats.into_iter().map(String::from).collect()));
        }
    }

    let mut headers: Vec<String> = keep.iter().map(|&j| table.headers[j].clone()).collect();
    let mut summary = EncodeSummary {
        categorical_columns: 0,
        numeric_columns: 0,
        dummy_columns: 0,
    };
    for plan in &plans {
        match plan {
            Plan::Numeric(j) => {
                headers.push(table.headers[*j].clone());
                summary.numeric_columns += 1;
            }
            Plan::Categorical(j, cats) => {
                headers.extend(cats.iter().map(|c| format!("{}={c}", table.headers[*j])));
                summary.categorical_columns += 1;
                summary.dummy_columns += cats.len();
            }
        }
    }

    let rows = table
        .rows
        .iter()
        .map(|r| {
            let mut out: Vec<String> = keep.iter().map(|&j| r[j].clone()).collect();
            for plan in &plans {
                match plan {
                    Plan::Numeric(j) => out.push(r[*j].clone()),
                    Plan::Categorical(j, cats) => {
                        out.extend(cats.iter().map(|c| if *c == r[*j] { "1" } else { "0" }.to_string()))
                    }
                }
            }
            out
        })
        .collect();
    Ok((RawTable { headers, rows }, summary))
}

pub fn encode_csv(
    input: impl AsRef<Path>,
    output: impl AsRef<Path>,
    has_header: bool,
    opts: &EncodeOptions,
) -> Result<EncodeSummary> {
    let table = RawTable::read(input, has_header)?;
    let (encoded, summary) = one_hot(&table, opts)?;
    encoded.write(output)?;
    Ok(summary)
}
