//! Typed raw tables read from headered CSV.

use std::io::Read;
use std::path::Path;

use super::schema::{ColumnKind, Schema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum RawValues {
    Continuous(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

impl RawValues {
    pub fn len(&self) -> usize {
        match self {
            RawValues::Continuous(v) => v.len(),
            RawValues::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> Self {
        match self {
            RawValues::Continuous(v) => RawValues::Continuous(rows.iter().map(|&r| v[r]).collect()),
            RawValues::Categorical(v) => RawValues::Categorical(rows.iter().map(|&r| v[r].clone()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawColumn {
    pub name: String,
    pub values: RawValues,
}

/// Non-ignored schema columns in schema order, plus mapped y and s.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub columns: Vec<RawColumn>,
    pub y: Vec<u8>,
    pub s: Vec<u8>,
    /// Rows discarded because a required field was missing or unparseable.
    pub dropped: usize,
    pub source: String,
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || field == "?"
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            columns: self
                .columns
                .iter()
                .map(|c| RawColumn {
                    name: c.name.clone(),
                    values: c.values.select(rows),
                })
                .collect(),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            s: rows.iter().map(|&r| self.s[r]).collect(),
            dropped: 0,
            source: self.source.clone(),
        }
    }
}

pub fn load_csv(path: &Path, schema: &Schema) -> Result<RawTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, path, schema)
}

/// `origin` is only used in error messages and as the provenance tag.
pub fn read_csv<R: Read>(reader: R, origin: &Path, schema: &Schema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::Empty(format!("{}: no header", origin.display())));
    }
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn {
            column: name.to_string(),
            path: origin.to_path_buf(),
        })
    };
    let label_at = find(&schema.label.column)?;
    let sens_at = find(&schema.sensitive.column)?;
    let mut cols = Vec::new();
    for c in &schema.columns {
        match c.kind {
            ColumnKind::Ignore => {}
            ColumnKind::Continuous => cols.push((find(&c.name)?, c.name.clone(), true)),
            ColumnKind::Categorical { .. } => cols.push((find(&c.name)?, c.name.clone(), false)),
        }
    }

    let mut cont: Vec<Vec<Option<f64>>> = vec![Vec::new(); cols.len()];
    let mut cat: Vec<Vec<Option<String>>> = vec![Vec::new(); cols.len()];
    let (mut y, mut s) = (Vec::new(), Vec::new());
    let mut dropped = 0;
    let mut record = csv::StringRecord::new();
    'rows: while rdr.read_record(&mut record)? {
        let label = &record[label_at];
        let sens = &record[sens_at];
        if is_missing(label) || is_missing(sens) {
            dropped += 1;
            continue;
        }
        let yv = schema.label.rule.map(label).ok_or_else(|| Error::Unmappable {
            column: schema.label.column.clone(),
            value: label.to_string(),
        })?;
        let sv = schema.sensitive.rule.map(sens).ok_or_else(|| Error::Unmappable {
            column: schema.sensitive.column.clone(),
            value: sens.to_string(),
        })?;
        let mut parsed = Vec::with_capacity(cols.len());
        for (at, _, continuous) in &cols {
            let field = &record[*at];
            if *continuous && !is_missing(field) {
                match field.parse::<f64>() {
                    Ok(v) if v.is_finite() => parsed.push(Some(v)),
                    _ => {
                        dropped += 1;
                        continue 'rows;
                    }
                }
            } else {
                parsed.push(None);
            }
        }
        for (k, (at, _, continuous)) in cols.iter().enumerate() {
            let field = &record[*at];
            if *continuous {
                cont[k].push(parsed[k]);
            } else {
                cat[k].push((!is_missing(field)).then(|| field.to_string()));
            }
        }
        y.push(yv);
        s.push(sv);
    }
    if y.is_empty() {
        return Err(Error::Empty(format!("{}: no usable rows", origin.display())));
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} rows with missing or unparseable required fields", origin.display());
    }
    let columns = cols
        .into_iter()
        .enumerate()
        .map(|(k, (_, name, continuous))| RawColumn {
            name,
            values: if continuous {
                RawValues::Continuous(std::mem::take(&mut cont[k]))
            } else {
                RawValues::Categorical(std::mem::take(&mut cat[k]))
            },
        })
        .collect();
    Ok(RawTable {
        columns,
        y,
        s,
        dropped,
        source: origin.display().to_string(),
    })
}
