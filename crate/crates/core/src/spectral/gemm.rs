//! Dense products on nalgebra storage through faer kernels (serial).

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par};
use nalgebra::DMatrix;
use num_complex::Complex64;

macro_rules! gemm_impl {
    ($name:ident, $t:ty, $zero:expr, $one:expr) => {
        /// `op(a) * b`, where `op` is the conjugate transpose when `adjoint_a`.
        pub fn $name(a: &DMatrix<$t>, adjoint_a: bool, b: &DMatrix<$t>) -> DMatrix<$t> {
            let ra = MatRef::from_column_major_slice(a.as_slice(), a.nrows(), a.ncols());
            let rb = MatRef::from_column_major_slice(b.as_slice(), b.nrows(), b.ncols());
            let rows = if adjoint_a { a.ncols() } else { a.nrows() };
            let mut out = DMatrix::<$t>::from_element(rows, b.ncols(), $zero);
            let (m, n) = out.shape();
            let dst = MatMut::from_column_major_slice_mut(out.as_mut_slice(), m, n);
            if adjoint_a {
                matmul(dst, Accum::Replace, ra.adjoint(), rb, $one, Par::Seq);
            } else {
                matmul(dst, Accum::Replace, ra, rb, $one, Par::Seq);
            }
            out
        }
    };
}

gemm_impl!(gemm_real, f64, 0.0, 1.0);
gemm_impl!(gemm_complex, Complex64, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_nalgebra() {
        let a = DMatrix::<f64>::from_fn(7, 5, |i, j| (i as f64 - 2.0 * j as f64).sin());
        let b = DMatrix::<f64>::from_fn(7, 3, |i, j| (i * j) as f64 * 0.1);
        assert!((gemm_real(&a, true, &b) - a.transpose() * &b).amax() < 1e-14);
        let c = DMatrix::<f64>::from_fn(5, 3, |i, j| (i + j) as f64);
        assert!((gemm_real(&a, false, &c) - &a * &c).amax() < 1e-13);
        let z = a.map(|x| Complex64::new(x, 0.5 * x));
        let w = b.map(|x| Complex64::new(-x, x));
        let diff = gemm_complex(&z, true, &w) - z.adjoint() * &w;
        assert!(diff.iter().all(|d| d.norm() < 1e-13));
    }
}
