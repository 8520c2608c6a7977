use nalgebra::DMatrix;

use crate::error::{GsvdError, Result};

/// Compressed sparse row storage with sorted, duplicate-free column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from zero-based `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(GsvdError::DimensionMismatch {
                    context: "CsrMatrix::from_triplets",
                    expected: if i >= nrows { nrows } else { ncols },
                    found: if i >= nrows { i } else { j },
                });
            }
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            cols[next[i]] = j;
            vals[next[i]] = v;
            next[i] += 1;
        }

        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..nrows {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|p| (cols[p], vals[p])));
            row.sort_by_key(|&(j, _)| j);
            let mut p = 0;
            while p < row.len() {
                let j = row[p].0;
                let mut sum = 0.0;
                while p < row.len() && row[p].0 == j {
                    sum += row[p].1;
                    p += 1;
                }
                indices.push(j);
                values.push(sum);
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        })
    }

    /// Keep entries whose magnitude exceeds `drop_tol`.
    pub fn from_dense(m: &DMatrix<f64>, drop_tol: f64) -> Self {
        let mut trip = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v.abs() > drop_tol {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &trip).expect("indices in range")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Zero-based `(row, col, value)` entries in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for p in self.indptr[i]..self.indptr[i + 1] {
                out.push((i, self.indices[p], self.values[p]));
            }
        }
        out
    }

    pub fn to_dense_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub(crate) fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.indptr[i]..self.indptr[i + 1] {
                acc += self.values[p] * x[self.indices[p]];
            }
            *yi = acc;
        }
    }

    pub(crate) fn tmul_into(&self, y: &[f64], x: &mut [f64]) {
        x.fill(0.0);
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for p in self.indptr[i]..self.indptr[i + 1] {
                x[self.indices[p]] += self.values[p] * yi;
            }
        }
    }
}
