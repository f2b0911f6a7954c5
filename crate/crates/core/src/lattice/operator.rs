use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Square operator over a full lattice Hilbert space, stored in compressed
/// sparse row form.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
    is_real: bool,
}

impl OperatorMatrix {
    /// Builds from (row, col, value) triplets. Duplicates are summed, exact
    /// zeros after summation are dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dimension {dim}");
            if let (Some(&lr), Some(&lc)) = (rows.last(), col_idx.last()) {
                if lr == r && lc == c {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            col_idx.push(c);
            values.push(v);
        }
        let mut keep_cols = Vec::with_capacity(col_idx.len());
        let mut keep_vals = Vec::with_capacity(values.len());
        for ((r, c), v) in rows.into_iter().zip(col_idx).zip(values) {
            if v.re == 0.0 && v.im == 0.0 {
                continue;
            }
            row_ptr[r + 1] += 1;
            keep_cols.push(c);
            keep_vals.push(v);
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let is_real = keep_vals.iter().all(|v| v.im == 0.0);
        Self {
            dim,
            row_ptr,
            col_idx: keep_cols,
            values: keep_vals,
            is_real,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_triplets(dim, Vec::new())
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, Complex64::new(1.0, 0.0))).collect())
    }

    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        assert!(m.is_square());
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v.re != 0.0 || v.im != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// True when every stored entry has an exactly zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> Complex64 {
        self.diagonal().into_iter().sum()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out.is_real = out.values.iter().all(|v| v.im == 0.0);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut t: Vec<_> = self.triplets().collect();
        t.extend(other.triplets());
        Self::from_triplets(self.dim, t)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Sparse matrix product `self * other`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut t = Vec::new();
        let mut acc: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); self.dim];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; self.dim];
        for r in 0..self.dim {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !mark[c] {
                        mark[c] = true;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                t.push((r, c, acc[c]));
                acc[c] = Complex64::new(0.0, 0.0);
                mark[c] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.dim, t)
    }

    /// Kronecker product `self ⊗ other`; `self` is the more significant factor.
    pub fn kron(&self, other: &Self) -> Self {
        let d = other.dim;
        let mut t = Vec::with_capacity(self.nnz() * other.nnz());
        for (r1, c1, v1) in self.triplets() {
            for (r2, c2, v2) in other.triplets() {
                t.push((r1 * d + r2, c1 * d + c2, v1 * v2));
            }
        }
        Self::from_triplets(self.dim * d, t)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.dim,
            self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Max-entry norm of `A - A^dagger`.
    pub fn hermiticity_error(&self) -> f64 {
        self.sub(&self.adjoint()).max_abs()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `<x| A |x>`.
    pub fn expectation(&self, x: &[Complex64]) -> Complex64 {
        assert_eq!(x.len(), self.dim);
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..self.dim {
            let row: Complex64 = self.row(r).map(|(c, v)| v * x[c]).sum();
            acc += x[r].conj() * row;
        }
        acc
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// Real part as a dense matrix; fails unless the operator is real.
    pub fn to_dense_real(&self) -> Result<DMatrix<f64>> {
        if !self.is_real {
            return Err(Error::InvalidSpec(
                "operator has complex entries; use the Hermitian path".into(),
            ));
        }
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v.re;
        }
        Ok(m)
    }

    /// Coordinate-format text export: one `row col re im` line per entry.
    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "row,col,re,im")?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r},{c},{:.16e},{:.16e}", v.re, v.im)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn duplicates_sum_and_zeros_vanish() {
        let m = OperatorMatrix::from_triplets(2, vec![(0, 1, c(1.0)), (0, 1, c(-1.0)), (1, 1, c(2.0))]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(1, 1), c(2.0));
        assert_eq!(m.get(0, 1), c(0.0));
    }

    #[test]
    fn kron_matches_dense_kronecker() {
        let a = OperatorMatrix::from_triplets(2, vec![(0, 1, c(2.0)), (1, 0, Complex64::new(0.0, 1.0))]);
        let b = OperatorMatrix::from_triplets(3, vec![(0, 0, c(1.0)), (2, 1, c(-3.0))]);
        let dense = a.to_dense().kronecker(&b.to_dense());
        assert_eq!(a.kron(&b).to_dense(), dense);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = OperatorMatrix::from_triplets(3, vec![(0, 1, c(2.0)), (1, 2, c(1.0)), (2, 2, c(4.0))]);
        let b = OperatorMatrix::from_triplets(3, vec![(1, 0, c(3.0)), (2, 1, c(-1.0)), (2, 2, c(1.0))]);
        assert_eq!(a.matmul(&b).to_dense(), a.to_dense() * b.to_dense());
    }

    #[test]
    fn coo_export_lists_every_entry() {
        let m = OperatorMatrix::from_triplets(2, vec![(0, 0, c(1.0)), (1, 0, Complex64::new(0.5, -0.5))]);
        let mut buf = Vec::new();
        m.write_coo(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("1,0,5.0000000000000000e-1,-5.0000000000000000e-1"));
    }
}
