//! Dense column-major matrix.
//!
//! Every estimator in this crate works column-wise (one column per gene), so
//! columns are stored contiguously and handed out as slices.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Matrix { nrows, ncols, data: vec![0.0; nrows * ncols] }
    }

    /// An `nrows × 0` matrix, used for empty candidate sets.
    pub fn empty(nrows: usize) -> Self {
        Matrix { nrows, ncols: 0, data: Vec::new() }
    }

    pub fn from_column_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::DimensionMismatch(format!("{} values for a {nrows}x{ncols} matrix", data.len())));
        }
        Ok(Matrix { nrows, ncols, data })
    }

    pub fn from_columns<C: AsRef<[f64]>>(nrows: usize, columns: &[C]) -> Result<Self> {
        let mut data = Vec::with_capacity(nrows * columns.len());
        for (j, c) in columns.iter().enumerate() {
            let c = c.as_ref();
            if c.len() != nrows {
                return Err(Error::DimensionMismatch(format!("column {j} has {} rows, expected {nrows}", c.len())));
            }
            data.extend_from_slice(c);
        }
        Ok(Matrix { nrows, ncols: columns.len(), data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Matrix::zeros(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(Error::DimensionMismatch(format!("row {i} has {} columns, expected {ncols}", r.len())));
            }
            for (j, &v) in r.iter().enumerate() {
                m.data[j * nrows + i] = v;
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nrows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nrows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.ncols).map(move |j| self.col(j))
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.ncols).map(|j| self.get(i, j)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(rows.len(), self.ncols);
        for j in 0..self.ncols {
            let src = self.col(j);
            for (dst, &r) in out.col_mut(j).iter_mut().zip(rows) {
                *dst = src[r];
            }
        }
        out
    }

    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.nrows * cols.len());
        for &c in cols {
            data.extend_from_slice(self.col(c));
        }
        Matrix { nrows: self.nrows, ncols: cols.len(), data }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}
