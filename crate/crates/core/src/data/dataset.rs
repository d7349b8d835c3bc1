use std::path::Path;

use ndarray::{concatenate, Array2, Axis};

use crate::error::{Error, Result};

/// Preprocessed design matrix with binary label and sensitive flag per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub s: Vec<u8>,
    pub feature_names: Vec<String>,
    pub provenance: String,
    /// `(privileged, unprivileged)` indicator columns when the sensitive
    /// attribute is encoded as a two-way one-hot in `x`.
    pub sensitive_columns: Option<(usize, usize)>,
}

/// Row indices keyed by `(y, s)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubgroupIndex {
    cells: [[Vec<usize>; 2]; 2],
}

impl SubgroupIndex {
    pub fn new(y: &[u8], s: &[u8]) -> Self {
        let mut idx = Self::default();
        for (i, (&yi, &si)) in y.iter().zip(s).enumerate() {
            idx.cells[yi as usize][si as usize].push(i);
        }
        idx
    }

    pub fn get(&self, y: u8, s: u8) -> &[usize] {
        &self.cells[y as usize][s as usize]
    }

    pub fn len(&self, y: u8, s: u8) -> usize {
        self.get(y, s).len()
    }

    /// Cells in the order (1,1), (1,0), (0,1), (0,0).
    pub fn iter(&self) -> impl Iterator<Item = ((u8, u8), &[usize])> {
        [(1, 1), (1, 0), (0, 1), (0, 0)].into_iter().map(move |(y, s)| ((y, s), self.get(y, s)))
    }

    pub fn total(&self) -> usize {
        self.iter().map(|(_, v)| v.len()).sum()
    }

    pub fn require_all(&self, context: &str) -> Result<()> {
        for ((y, s), v) in self.iter() {
            if v.is_empty() {
                return Err(Error::EmptySubgroup {
                    y,
                    s,
                    context: context.to_string(),
                });
            }
        }
        Ok(())
    }
}

impl Dataset {
    pub fn new(
        x: Array2<f64>,
        y: Vec<u8>,
        s: Vec<u8>,
        feature_names: Vec<String>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let ds = Self {
            x,
            y,
            s,
            feature_names,
            provenance: provenance.into(),
            sensitive_columns: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_sensitive_columns(mut self, cols: Option<(usize, usize)>) -> Result<Self> {
        if let Some((a, b)) = cols {
            if a == b || a >= self.dim() || b >= self.dim() {
                return Err(Error::InvalidArgument(format!("bad sensitive indicator columns ({a}, {b})")));
            }
        }
        self.sensitive_columns = cols;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.nrows();
        if n == 0 {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        if self.y.len() != n || self.s.len() != n {
            return Err(Error::Shape(format!(
                "x has {n} rows but y has {} and s has {}",
                self.y.len(),
                self.s.len()
            )));
        }
        if self.feature_names.len() != self.x.ncols() {
            return Err(Error::Shape(format!(
                "{} feature names for {} columns",
                self.feature_names.len(),
                self.x.ncols()
            )));
        }
        if let Some((r, c)) = self.x.indexed_iter().find_map(|(rc, v)| (!v.is_finite()).then_some(rc)) {
            return Err(Error::NonFinite(format!("feature matrix at row {r}, column {c}")));
        }
        if self.y.iter().chain(&self.s).any(|&v| v > 1) {
            return Err(Error::InvalidArgument("labels and sensitive flags must be 0 or 1".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn subgroup_index(&self) -> SubgroupIndex {
        SubgroupIndex::new(&self.y, &self.s)
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select(Axis(0), rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            s: rows.iter().map(|&r| self.s[r]).collect(),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
            sensitive_columns: self.sensitive_columns,
        }
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        if self.feature_names != other.feature_names {
            return Err(Error::Shape("cannot concatenate datasets with different features".into()));
        }
        Ok(Self {
            x: concatenate(Axis(0), &[self.x.view(), other.x.view()]).map_err(|e| Error::Shape(e.to_string()))?,
            y: self.y.iter().chain(&other.y).copied().collect(),
            s: self.s.iter().chain(&other.s).copied().collect(),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
            sensitive_columns: self.sensitive_columns,
        })
    }

    /// Swaps the sensitive indicator pair and sets `s' = 1 − s`; every other
    /// column is copied bit for bit.
    pub fn counterfactual_flip(&self) -> Result<Self> {
        let (a, b) = self.sensitive_columns.ok_or(Error::NonBinarySensitive)?;
        let mut out = self.clone();
        for mut row in out.x.rows_mut() {
            row.swap(a, b);
        }
        for s in &mut out.s {
            *s = 1 - *s;
        }
        Ok(out)
    }

    pub fn positive_rate(&self, s: u8) -> Option<f64> {
        let (mut n, mut pos) = (0usize, 0usize);
        for (&yi, &si) in self.y.iter().zip(&self.s) {
            if si == s {
                n += 1;
                pos += yi as usize;
            }
        }
        (n > 0).then(|| pos as f64 / n as f64)
    }

    /// Header: feature names, then `y`, `s`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.extend(["y", "s"]);
        w.write_record(&header)?;
        let mut buf = Vec::with_capacity(header.len());
        for (i, row) in self.x.rows().into_iter().enumerate() {
            buf.clear();
            buf.extend(row.iter().map(|v| v.to_string()));
            buf.push(self.y[i].to_string());
            buf.push(self.s[i].to_string());
            w.write_record(&buf)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let d = header.len();
        if d < 2 || &header[d - 2] != "y" || &header[d - 1] != "s" {
            return Err(Error::Schema(format!("{}: last two columns must be `y`, `s`", path.display())));
        }
        let names: Vec<String> = header.iter().take(d - 2).map(String::from).collect();
        let (mut flat, mut y, mut s) = (Vec::new(), Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec?;
            for f in rec.iter().take(d - 2) {
                flat.push(f.parse::<f64>().map_err(|_| Error::Schema(format!("non-numeric feature `{f}`")))?);
            }
            let bit = |f: &str| match f {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                _ => Err(Error::Schema(format!("expected 0 or 1, got `{f}`"))),
            };
            y.push(bit(&rec[d - 2])?);
            s.push(bit(&rec[d - 1])?);
        }
        let x = Array2::from_shape_vec((y.len(), d - 2), flat).map_err(|e| Error::Shape(e.to_string()))?;
        Self::new(x, y, s, names, path.display().to_string())
    }
}
