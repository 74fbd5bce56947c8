use std::io::Read;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("dataset has no header row")]
    Empty,
    #[error("missing column(s): {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("column {column:?} row {row}: {value:?} is not numeric")]
    NotNumeric { column: String, row: usize, value: String },
}

/// Column-oriented table of raw cell strings. Empty cells are missing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<Option<String>>>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
            return Err(DatasetError::Empty);
        }
        let names: Vec<String> = headers.iter().map(str::to_string).collect();
        let mut columns = vec![Vec::new(); names.len()];
        for record in rdr.records() {
            let record = record?;
            for (col, cell) in columns.iter_mut().zip(record.iter()) {
                col.push((!cell.is_empty()).then(|| cell.to_string()));
            }
        }
        Ok(Dataset { names, columns })
    }

    pub fn from_path(path: &Path) -> Result<Self, DatasetError> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<Option<String>>) {
        assert!(self.columns.is_empty() || values.len() == self.n_rows(), "column length mismatch");
        self.names.push(name.into());
        self.columns.push(values);
    }

    pub fn push_numeric(&mut self, name: impl Into<String>, values: &[f64]) {
        self.push_column(name, values.iter().map(|v| Some(v.to_string())).collect());
    }

    pub fn push_text<S: ToString>(&mut self, name: impl Into<String>, values: &[S]) {
        self.push_column(name, values.iter().map(|v| Some(v.to_string())).collect());
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<&[Option<String>]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    pub fn require(&self, names: &[&str]) -> Result<(), DatasetError> {
        let missing: Vec<String> = names.iter().filter(|n| !self.has_column(n)).map(|n| n.to_string()).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(DatasetError::MissingColumns(missing))
        }
    }

    /// Parses a column as numbers; missing cells stay `None`.
    pub fn numeric(&self, name: &str) -> Result<Vec<Option<f64>>, DatasetError> {
        let col = self.column(name).ok_or_else(|| DatasetError::MissingColumns(vec![name.to_string()]))?;
        col.iter()
            .enumerate()
            .map(|(row, cell)| match cell {
                None => Ok(None),
                Some(s) => s.trim().parse::<f64>().map(Some).map_err(|_| DatasetError::NotNumeric {
                    column: name.to_string(),
                    row,
                    value: s.clone(),
                }),
            })
            .collect()
    }

    /// Keeps the rows for which `keep(row)` is true.
    pub fn filter_rows(&self, mut keep: impl FnMut(usize) -> bool) -> Dataset {
        let rows: Vec<usize> = (0..self.n_rows()).filter(|r| keep(*r)).collect();
        Dataset {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| rows.iter().map(|r| c[*r].clone()).collect()).collect(),
        }
    }

    /// Mean of `value` within groups sharing `key`, one row per group with the
    /// first-seen values of `carry` columns. Groups keep first-seen order.
    pub fn group_mean(&self, key: &str, value: &str, carry: &[&str]) -> Result<Dataset, DatasetError> {
        let mut needed = vec![key, value];
        needed.extend_from_slice(carry);
        self.require(&needed)?;
        let keys = self.column(key).expect("checked");
        let values = self.numeric(value)?;
        let mut order: Vec<&str> = Vec::new();
        let mut first_row = Vec::new();
        let mut sums: Vec<(f64, usize)> = Vec::new();
        for (row, (k, v)) in keys.iter().zip(&values).enumerate() {
            let (Some(k), Some(v)) = (k, v) else { continue };
            let idx = match order.iter().position(|o| o == k) {
                Some(i) => i,
                None => {
                    order.push(k);
                    first_row.push(row);
                    sums.push((0.0, 0));
                    order.len() - 1
                }
            };
            sums[idx].0 += v;
            sums[idx].1 += 1;
        }
        let mut out = Dataset::new();
        out.push_text(key, &order);
        out.push_numeric(value, &sums.iter().map(|(s, n)| s / *n as f64).collect::<Vec<_>>());
        for c in carry {
            let col = self.column(c).expect("checked");
            out.push_column(*c, first_row.iter().map(|r| col[*r].clone()).collect());
        }
        Ok(out)
    }
}
