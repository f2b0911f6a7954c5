//! Dense Hermitian eigensolvers (faer), exchanged through nalgebra matrices.

use faer::{Mat, Par, Side};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

fn sequential() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    // parallelism lives at the block level; a serial kernel keeps results
    // independent of the worker count
    ONCE.call_once(|| faer::set_global_parallelism(Par::Seq));
}

/// Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a real
/// symmetric matrix. Only the lower triangle is referenced.
pub fn eigh_real(a: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    sequential();
    let n = a.nrows();
    assert!(a.is_square());
    if n == 0 {
        return Ok((Vec::new(), a));
    }
    let m = Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)]);
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s = eig.S();
    let u = eig.U();
    let w = (0..n).map(|i| s[i]).collect();
    Ok((w, DMatrix::from_fn(n, n, |i, j| u[(i, j)])))
}

/// Complex Hermitian counterpart of [`eigh_real`].
pub fn eigh_complex(a: DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    sequential();
    let n = a.nrows();
    assert!(a.is_square());
    if n == 0 {
        return Ok((Vec::new(), a));
    }
    let m = Mat::<faer::c64>::from_fn(n, n, |i, j| {
        let z = a[(i, j)];
        faer::c64::new(z.re, z.im)
    });
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s = eig.S();
    let u = eig.U();
    let w = (0..n).map(|i| s[i].re).collect();
    Ok((
        w,
        DMatrix::from_fn(n, n, |i, j| {
            let z = u[(i, j)];
            Complex64::new(z.re, z.im)
        }),
    ))
}
