//! Minimal compressed-sparse-row matrices over `Complex64`, enough to
//! compose stencil operators and assemble Newton Jacobians.

use num_complex::Complex64;

use crate::par;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, indptr: vec![0; rows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn diagonal(d: &[Complex64]) -> Self {
        let n = d.len();
        Self { rows: n, cols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), values: d.to_vec() }
    }

    /// Builds from per-row entry lists; duplicate columns within a row are summed.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, Complex64)>>) -> Self {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                debug_assert!(c < cols);
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        Self { rows: nrows, cols, indptr, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        par::map_indexed(self.rows, |r| self.row(r).fold(ZERO, |acc, (c, v)| acc + v * x[c]))
    }

    /// `self * other` via a dense row accumulator.
    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let rows = par::map_indexed(self.rows, |r| {
            let mut acc: Vec<(usize, Complex64)> = Vec::new();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    acc.push((c, a * b));
                }
            }
            acc
        });
        CsrMatrix::from_rows(other.cols, rows)
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[Complex64]) -> CsrMatrix {
        assert_eq!(d.len(), self.rows);
        let mut out = self.clone();
        for r in 0..self.rows {
            for k in out.indptr[r]..out.indptr[r + 1] {
                out.values[k] *= d[r];
            }
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Entry-wise complex conjugate (not the adjoint).
    pub fn conj(&self) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    pub fn add(&self, other: &CsrMatrix) -> CsrMatrix {
        self.axpby(Complex64::new(1.0, 0.0), other, Complex64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &CsrMatrix) -> CsrMatrix {
        self.axpby(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: Complex64, other: &CsrMatrix, b: Complex64) -> CsrMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let rows = par::map_indexed(self.rows, |r| {
            self.row(r).map(|(c, v)| (c, a * v)).chain(other.row(r).map(|(c, v)| (c, b * v))).collect()
        });
        CsrMatrix::from_rows(self.cols, rows)
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.rows, other.rows);
        let off = self.cols;
        let rows = (0..self.rows).map(|r| self.row(r).chain(other.row(r).map(|(c, v)| (c + off, v))).collect()).collect();
        CsrMatrix::from_rows(self.cols + other.cols, rows)
    }

    /// Columns `[start, start + len)`.
    pub fn column_block(&self, start: usize, len: usize) -> CsrMatrix {
        let rows = (0..self.rows)
            .map(|r| self.row(r).filter(|(c, _)| *c >= start && *c < start + len).map(|(c, v)| (c - start, v)).collect())
            .collect();
        CsrMatrix::from_rows(len, rows)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CsrMatrix {
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); self.cols];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                rows[c].push((r, v.conj()));
            }
        }
        CsrMatrix::from_rows(self.rows, rows)
    }

    /// `diag(l) * self * diag(r)` for real scalings.
    pub fn scale_both(&self, l: &[f64], r: &[f64]) -> CsrMatrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            for k in out.indptr[i]..out.indptr[i + 1] {
                out.values[k] *= l[i] * r[out.indices[k]];
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut out = vec![vec![ZERO; self.cols]; self.rows];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                out[r][c] += v;
            }
        }
        out
    }
}
