use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result, Shape};

// Block sizes for the inner product loops. A KB x JB tile of the right-hand
// operand (256 * 256 * 8 bytes) stays resident in L2 while every row of the
// left-hand operand streams past it.
const KB: usize = 256;
const JB: usize = 256;
// Products smaller than this many multiply-adds run on the calling thread.
const PAR_THRESHOLD: usize = 1 << 18;

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Which dimension a reduction collapses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Reduce over rows; the result has one entry per column.
    Rows,
    /// Reduce over columns; the result has one entry per row.
    Cols,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduce {
    Sum,
    Mean,
    Max,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::param(format!(
                "buffer of length {} cannot hold a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::param(format!(
                    "row {i} has length {}, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(DenseMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn row_vector(values: &[f64]) -> Self {
        DenseMatrix {
            rows: 1,
            cols: values.len(),
            data: values.to_vec(),
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
    pub fn shape(&self) -> Shape {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// Copies the rows at `indices` (in that order) into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        DenseMatrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Contiguous row range `[start, end)` as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> DenseMatrix {
        DenseMatrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Standard matrix product `self * rhs`.
    ///
    /// Every output entry accumulates its products in ascending inner index
    /// order starting from zero, exactly like the textbook triple loop, so
    /// the result is bit-identical to it regardless of blocking or threading.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::shape("matmul", self.shape(), rhs.shape()));
        }
        let (m, k, n) = (self.rows, self.cols, rhs.cols);
        let mut out = DenseMatrix::zeros(m, n);
        if m == 0 || n == 0 || k == 0 {
            return Ok(out);
        }
        let a = &self.data;
        let b = &rhs.data;
        if m * n * k < PAR_THRESHOLD || m < 2 {
            gemm_rows(a, b, &mut out.data, 0, k, n);
        } else {
            let rows_per_task = (m / rayon::current_num_threads().max(1)).clamp(1, 64);
            out.data
                .par_chunks_mut(rows_per_task * n)
                .enumerate()
                .for_each(|(t, c)| gemm_rows(a, b, c, t * rows_per_task, k, n));
        }
        Ok(out)
    }

    /// `selfᵀ * rhs`.
    pub fn t_matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != rhs.rows {
            return Err(Error::shape("t_matmul", self.shape(), rhs.shape()));
        }
        self.transpose().matmul(rhs)
    }

    /// `self * rhsᵀ`.
    pub fn matmul_t(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.cols {
            return Err(Error::shape("matmul_t", self.shape(), rhs.shape()));
        }
        self.matmul(&rhs.transpose())
    }

    pub fn transpose(&self) -> DenseMatrix {
        let (r, c) = (self.rows, self.cols);
        let mut out = DenseMatrix::zeros(c, r);
        const TB: usize = 32;
        for ib in (0..r).step_by(TB) {
            for jb in (0..c).step_by(TB) {
                for i in ib..(ib + TB).min(r) {
                    for j in jb..(jb + TB).min(c) {
                        out.data[j * r + i] = self.data[i * c + j];
                    }
                }
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    pub fn zip_with(&self, other: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> Result<DenseMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::shape("zip_with", self.shape(), other.shape()));
        }
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Adds `row` to every row of the matrix.
    pub fn add_row_broadcast(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.cols {
            return Err(Error::shape(
                "add_row_broadcast",
                self.shape(),
                (1, row.len()),
            ));
        }
        for r in self.data.chunks_exact_mut(self.cols.max(1)) {
            for (v, b) in r.iter_mut().zip(row) {
                *v += b;
            }
        }
        Ok(())
    }

    pub fn reduce_axis(&self, axis: Axis, op: Reduce) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::EmptyInput("reduce_axis"));
        }
        let out = match axis {
            Axis::Rows => {
                let mut acc = match op {
                    Reduce::Max => self.row(0).to_vec(),
                    _ => vec![0.0; self.cols],
                };
                let skip = usize::from(op == Reduce::Max);
                for r in self.row_iter().skip(skip) {
                    for (a, &v) in acc.iter_mut().zip(r) {
                        match op {
                            Reduce::Max => {
                                if v > *a {
                                    *a = v
                                }
                            }
                            _ => *a += v,
                        }
                    }
                }
                if op == Reduce::Mean {
                    let n = self.rows as f64;
                    acc.iter_mut().for_each(|a| *a /= n);
                }
                acc
            }
            Axis::Cols => self
                .row_iter()
                .map(|r| match op {
                    Reduce::Sum => r.iter().sum(),
                    Reduce::Mean => r.iter().sum::<f64>() / self.cols as f64,
                    Reduce::Max => r.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                })
                .collect(),
        };
        Ok(out)
    }

    /// Index of the maximum along `axis`; ties go to the lowest index.
    pub fn argmax_axis(&self, axis: Axis) -> Result<Vec<usize>> {
        if self.is_empty() {
            return Err(Error::EmptyInput("argmax_axis"));
        }
        Ok(match axis {
            Axis::Cols => self.row_iter().map(argmax).collect(),
            Axis::Rows => (0..self.cols)
                .map(|c| {
                    let mut best = 0;
                    for r in 1..self.rows {
                        if self.get(r, c) > self.get(best, c) {
                            best = r;
                        }
                    }
                    best
                })
                .collect(),
        })
    }

    pub fn scale_inplace(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &DenseMatrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape("axpy", self.shape(), other.shape()));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Lowest index of the maximum entry.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Accumulates rows of `a * b` into `c`, where `c` holds consecutive output
/// rows starting at `row0`.
fn gemm_rows(a: &[f64], b: &[f64], c: &mut [f64], row0: usize, k: usize, n: usize) {
    let rows = c.len() / n;
    for jb in (0..n).step_by(JB) {
        let je = (jb + JB).min(n);
        for kb in (0..k).step_by(KB) {
            let ke = (kb + KB).min(k);
            for i in 0..rows {
                let a_row = &a[(row0 + i) * k..(row0 + i + 1) * k];
                let c_row = &mut c[i * n + jb..i * n + je];
                for p in kb..ke {
                    let aip = a_row[p];
                    let b_row = &b[p * n + jb..p * n + je];
                    for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                        *cv += aip * bv;
                    }
                }
            }
        }
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix {}x{} ", self.rows, self.cols)?;
        if self.data.len() <= 64 {
            f.debug_list().entries(self.row_iter()).finish()
        } else {
            write!(f, "[..]")
        }
    }
}
