use std::collections::HashSet;

use crate::{Error, Result, SampleId};

/// Row-major dense real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Largest |a_ij - a_ji|, with its position. `None` for non-square input.
    pub fn max_asymmetry(&self) -> Option<(usize, usize, f64)> {
        if self.rows != self.cols {
            return None;
        }
        let mut worst = (0, 0, 0.0);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let d = (self[(i, j)] - self[(j, i)]).abs();
                if d > worst.2 || d.is_nan() {
                    worst = (i, j, d);
                }
            }
        }
        Some(worst)
    }

    /// Dense product `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let o = out.row_mut(i);
            for (l, &ail) in a.iter().enumerate() {
                if ail == 0.0 {
                    continue;
                }
                for (oj, &blj) in o.iter_mut().zip(other.row(l)) {
                    *oj += ail * blj;
                }
            }
        }
        Ok(out)
    }

    /// Rows selected by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }

    /// Square sub-matrix on the given index set.
    pub fn principal_submatrix(&self, idx: &[usize]) -> Matrix {
        let m = idx.len();
        let mut out = Matrix::zeros(m, m);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out[(a, b)] = self[(i, j)];
            }
        }
        out
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// n×d embedding vectors, one row per sample, each row tagged with a
/// [`SampleId`].
///
/// Construction validates that the matrix is non-empty, every value is
/// finite, and ids are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Matrix,
    ids: Vec<SampleId>,
}

impl FeatureMatrix {
    pub fn new(ids: Vec<SampleId>, values: Matrix) -> Result<Self> {
        if values.rows() == 0 {
            return Err(Error::Empty("feature matrix has no rows"));
        }
        if values.cols() == 0 {
            return Err(Error::Empty("feature matrix has no columns"));
        }
        if ids.len() != values.rows() {
            return Err(Error::DimensionMismatch { expected: values.rows(), got: ids.len() });
        }
        for i in 0..values.rows() {
            if let Some(col) = values.row(i).iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i, col });
            }
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(*id) {
                return Err(Error::DuplicateId(*id));
            }
        }
        Ok(Self { values, ids })
    }

    /// Rows get ids `0..n`.
    pub fn with_sequential_ids(values: Matrix) -> Result<Self> {
        let ids = (0..values.rows() as u64).map(SampleId).collect();
        Self::new(ids, values)
    }

    pub fn from_rows(ids: Vec<SampleId>, rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(ids, Matrix::from_rows(rows)?)
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn d(&self) -> usize {
        self.values.cols()
    }

    pub fn ids(&self) -> &[SampleId] {
        &self.ids
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn index_of(&self) -> std::collections::HashMap<SampleId, usize> {
        self.ids.iter().enumerate().map(|(i, id)| (*id, i)).collect()
    }

    /// Sub-matrix holding only `ids`, in the given order.
    pub fn subset(&self, ids: &[SampleId]) -> Result<FeatureMatrix> {
        let index = self.index_of();
        let rows = ids
            .iter()
            .map(|id| index.get(id).copied().ok_or(Error::UnknownId(*id)))
            .collect::<Result<Vec<_>>>()?;
        FeatureMatrix::new(ids.to_vec(), self.values.select_rows(&rows))
    }
}

/// Inner product with eight independent partial sums, so the loop
/// vectorizes; the summation order is fixed, so results are reproducible.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}
