//! Row-major design matrices and regression datasets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major `rows x cols` matrix of finite doubles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Single-column matrix, the univariate design used throughout the simulations.
    pub fn column(values: Vec<f64>) -> Result<Self> {
        let rows = values.len();
        Self::from_row_major(rows, 1, values)
    }

    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    what: "matrix row",
                    expected: cols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

    pub fn empty(cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        let step = self.cols.max(1);
        self.data.chunks_exact(step).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Returns a copy with rows reordered so that row `i` of the result is row `order[i]` here.
    pub fn select_rows(&self, order: &[usize]) -> Self {
        let mut data = Vec::with_capacity(order.len() * self.cols);
        for &i in order {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: order.len(),
            cols: self.cols,
            data,
        }
    }
}

/// How a dataset was produced, kept next to the data so audits can use the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub f0_values: Vec<f64>,
    pub noise: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    pub noise_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<Generation>,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "response vector",
                expected: x.rows(),
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response vector"));
        }
        Ok(Self {
            x,
            y,
            generation: None,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.x.cols()
    }

    /// Reads a CSV with a header row. The last column is the response, every other
    /// column is an input coordinate.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::Reader::from_reader(file);
        let width = reader.headers()?.len();
        if width < 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: "need at least one input column and a response column".into(),
            });
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            for (k, field) in record.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("row {}: column {} is not a number: {field:?}", line + 1, k + 1),
                })?;
                if k + 1 == width {
                    ys.push(v);
                } else {
                    xs.push(v);
                }
            }
        }
        let x = Matrix::from_row_major(ys.len(), width - 1, xs)?;
        Self::new(x, ys)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (1..=self.input_dim()).map(|k| format!("x{k}")).collect();
        header.push("y".into());
        writer.write_record(&header)?;
        for (row, y) in self.x.iter_rows().zip(&self.y) {
            let mut fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            fields.push(format!("{y:?}"));
            writer.write_record(&fields)?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_and_non_finite_input() {
        assert!(Matrix::from_row_major(2, 2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]], 1).is_err());
        assert!(matches!(
            Matrix::column(vec![1.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        let x = Matrix::column(vec![0.0, 1.0]).unwrap();
        assert!(Dataset::new(x, vec![1.0]).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let x = Matrix::from_rows(&[vec![0.1, -2.0 / 3.0], vec![1e-300, 7.0]], 2).unwrap();
        let data = Dataset::new(x, vec![std::f64::consts::PI, -0.0]).unwrap();
        data.write_csv(&path).unwrap();
        let back = Dataset::read_csv(&path).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn empty_matrix_iterates_nothing() {
        let m = Matrix::empty(3);
        assert_eq!(m.iter_rows().count(), 0);
    }
}
