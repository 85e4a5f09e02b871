//! Dense row-major f64 matrices, a small symmetric-positive-definite solver,
//! and a reproducible random-number source.
//!
//! Everything here is pure: operations take immutable inputs and return fresh
//! values, so matrices can be shared read-only across threads. `matmul`
//! accumulates each output entry over `k` in ascending order, which keeps
//! results bit-identical to a naive triple loop.

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense matrix of f64 values in row-major order.
///
/// Entries are finite in normal operation: constructors taking external
/// data validate it, and the training loop checks intermediates so that
/// divergence surfaces as a `NonFinite` error rather than poisoning
/// downstream results.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if data.len() != rows * cols {
            return Err(Error::dim(
                "from_vec",
                format!(
                    "{}x{} needs {} entries, got {}",
                    rows,
                    cols,
                    rows * cols,
                    data.len()
                ),
            ));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry {v}")));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("from_rows: no rows".into()));
        }
        let cols = rows[0].len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::dim(
                "from_rows",
                format!("row {} has {} entries, expected {}", i, r.len(), cols),
            ));
        }
        Matrix::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Standard matrix product. Each output entry sums over `k` ascending,
    /// matching a naive triple-loop computation bit for bit.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dim(
                "matmul",
                format!(
                    "{}x{} * {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        let n = other.cols;
        for i in 0..self.rows {
            let a_row = &self.data[i * self.cols..(i + 1) * self.cols];
            let o_row = &mut out.data[i * n..(i + 1) * n];
            for (k, &aik) in a_row.iter().enumerate() {
                let b_row = &other.data[k * n..(k + 1) * n];
                for j in 0..n {
                    o_row[j] += aik * b_row[j];
                }
            }
        }
        Ok(out)
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with("hadamard", other, |a, b| a * b)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with("add", other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with("sub", other, |a, b| a - b)
    }

    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dim(
                "add_assign",
                format!(
                    "{}x{} vs {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    fn zip_with(
        &self,
        op: &'static str,
        other: &Matrix,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dim(
                op,
                format!(
                    "{}x{} vs {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise hyperbolic tangent; outputs lie in (-1, 1).
    pub fn tanh_elem(&self) -> Matrix {
        self.map(f64::tanh)
    }

    pub fn scale(&self, c: f64) -> Matrix {
        self.map(|v| c * v)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Squared Frobenius norm.
    pub fn frob_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                sums[j] += self.data[i * self.cols + j];
            }
        }
        sums
    }

    /// Indices of the `k` largest entries of column `col`, in descending
    /// value order; ties broken by smaller row index first.
    pub fn column_topk_indices(&self, col: usize, k: usize) -> Result<Vec<usize>> {
        if col >= self.cols {
            return Err(Error::InvalidArgument(format!(
                "column_topk_indices: column {} out of range ({} columns)",
                col, self.cols
            )));
        }
        if k > self.rows {
            return Err(Error::InvalidArgument(format!(
                "column_topk_indices: k = {} exceeds {} rows",
                k, self.rows
            )));
        }
        let mut order: Vec<usize> = (0..self.rows).collect();
        order.sort_by(|&a, &b| {
            let va = self.get(a, col);
            let vb = self.get(b, col);
            vb.partial_cmp(&va).unwrap().then(a.cmp(&b))
        });
        order.truncate(k);
        Ok(order)
    }

    /// New matrix whose rows are `self`'s rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::InvalidArgument(format!(
                    "select_rows: row {} out of range ({} rows)",
                    i, self.rows
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        })
    }
}

/// Inverse of a symmetric positive-definite matrix via Cholesky factorization.
/// Fails with `InvalidArgument` when the matrix is not positive definite
/// (callers that expect near-singular inputs add a ridge and retry).
pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    if a.rows != a.cols {
        return Err(Error::dim("spd_inverse", format!("{}x{}", a.rows, a.cols)));
    }
    let n = a.rows;
    // Lower-triangular factor L with A = L L^T.
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return Err(Error::InvalidArgument(
                        "spd_inverse: matrix not positive definite".into(),
                    ));
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    // Solve A x = e_c per column: forward then back substitution.
    let mut inv = Matrix::zeros(n, n);
    let mut y = vec![0.0f64; n];
    for c in 0..n {
        for i in 0..n {
            let mut sum = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                sum -= l[i * n + k] * y[k];
            }
            y[i] = sum / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in i + 1..n {
                sum -= l[k * n + i] * inv.data[k * n + c];
            }
            inv.data[i * n + c] = sum / l[i * n + i];
        }
    }
    Ok(inv)
}

/// Seeded random source. Identical seeds produce identical draw sequences
/// across runs and platforms (the underlying stream cipher is fully
/// specified).
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> SeededRng {
        SeededRng {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform draw in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform draw in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal draw via the Box-Muller transform.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64(); // (0, 1], keeps ln finite
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        xs.shuffle(&mut self.inner);
    }

    /// Uniform index in [0, n).
    pub fn gen_index(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }
}
