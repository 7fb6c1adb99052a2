use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// N observations × M named variables, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    names: Vec<String>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if values.ncols() != names.len() {
            return Err(Error::Input(format!(
                "{} columns but {} variable names",
                values.ncols(),
                names.len()
            )));
        }
        if values.nrows() < 2 || values.ncols() < 1 {
            return Err(Error::Input(format!(
                "data matrix needs N >= 2 and M >= 1, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::Input(format!("non-finite value at row {r}, column {}", names[c])));
        }
        Ok(Self { values, names })
    }

    /// Builds from row-major storage.
    pub fn from_row_major(data: &[f64], ncols: usize, names: Vec<String>) -> Result<Self> {
        if ncols == 0 || !data.len().is_multiple_of(ncols) {
            return Err(Error::Input("row-major buffer is not a whole number of rows".into()));
        }
        Self::new(DMatrix::from_row_slice(data.len() / ncols, ncols, data), names)
    }

    pub fn from_rows(rows: &[Vec<f64>], names: Vec<String>) -> Result<Self> {
        let m = names.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Input("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(&flat, m, names)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    /// Columns `names`, in that order.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        if names == self.names.as_slice() {
            return Ok(self.clone());
        }
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::Input(format!("unknown variable \"{n}\"")))
            })
            .collect::<Result<Vec<_>>>()?;
        let values = DMatrix::from_fn(self.nrows(), idx.len(), |r, c| self.values[(r, idx[c])]);
        Ok(Self {
            values,
            names: names.to_vec(),
        })
    }

    /// Rows `start..end`. Fails if fewer than two rows remain.
    pub fn rows_range(&self, start: usize, end: usize) -> Result<Self> {
        let end = end.min(self.nrows());
        if start >= end {
            return Err(Error::Input(format!("empty row range {start}..{end}")));
        }
        Self::new(self.values.rows(start, end - start).into_owned(), self.names.clone())
    }

    /// Stacks matrices with identical variable names on top of each other.
    pub fn vstack(parts: &[DataMatrix]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Input("nothing to stack".into()))?;
        if parts.iter().any(|p| p.names != first.names) {
            return Err(Error::Input("stacked matrices have different variables".into()));
        }
        let n: usize = parts.iter().map(|p| p.nrows()).sum();
        let mut values = DMatrix::zeros(n, first.ncols());
        let mut offset = 0;
        for p in parts {
            values.rows_mut(offset, p.nrows()).copy_from(&p.values);
            offset += p.nrows();
        }
        Ok(Self {
            values,
            names: first.names.clone(),
        })
    }
}
