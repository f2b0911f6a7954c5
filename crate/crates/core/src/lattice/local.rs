use nalgebra::DMatrix;
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// A single-site operator acting on a `dim`-level local Hilbert space.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOperator {
    pub dim: usize,
    pub entries: DMatrix<Complex64>,
    pub name: String,
}

impl LocalOperator {
    pub fn new(name: impl Into<String>, entries: DMatrix<Complex64>) -> Self {
        assert!(entries.is_square(), "local operator must be square");
        Self {
            dim: entries.nrows(),
            entries,
            name: name.into(),
        }
    }

    fn from_rows<const N: usize>(name: &str, rows: [[Complex64; N]; N]) -> Self {
        Self::new(name, DMatrix::from_fn(N, N, |i, j| rows[i][j]))
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(format!("id{dim}"), DMatrix::identity(dim, dim))
    }

    pub fn sigma_x() -> Self {
        Self::from_rows("sigma_x", [[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn sigma_y() -> Self {
        Self::from_rows("sigma_y", [[ZERO, -I], [I, ZERO]])
    }

    pub fn sigma_z() -> Self {
        Self::from_rows("sigma_z", [[ONE, ZERO], [ZERO, -ONE]])
    }

    /// Gell-Mann matrix `lambda_k`, `k` in 1..=8, in the basis |0>, |1>, |2>.
    pub fn gell_mann(k: usize) -> Self {
        let (o, z, i) = (ONE, ZERO, I);
        let rows = match k {
            1 => [[z, o, z], [o, z, z], [z, z, z]],
            2 => [[z, -i, z], [i, z, z], [z, z, z]],
            3 => [[o, z, z], [z, -o, z], [z, z, z]],
            4 => [[z, z, o], [z, z, z], [o, z, z]],
            5 => [[z, z, -i], [z, z, z], [i, z, z]],
            6 => [[z, z, z], [z, z, o], [z, o, z]],
            7 => [[z, z, z], [z, z, -i], [z, i, z]],
            8 => {
                let s = Complex64::new(1.0 / 3f64.sqrt(), 0.0);
                [[s, z, z], [z, s, z], [z, z, -2.0 * s]]
            }
            _ => panic!("Gell-Mann index {k} outside 1..=8"),
        };
        Self::from_rows(&format!("lambda_{k}"), rows)
    }

    /// Local charge: projector onto the third level |2>.
    pub fn charge() -> Self {
        let (o, z) = (ONE, ZERO);
        Self::from_rows("q", [[z, z, z], [z, z, z], [z, z, o]])
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let adj = self.entries.adjoint();
        (&self.entries - adj).iter().all(|z| z.norm() <= tol)
    }

    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|z| z.im == 0.0)
    }

    /// `<psi| op |psi>` for a single-site state.
    pub fn expectation(&self, psi: &[Complex64]) -> Complex64 {
        assert_eq!(psi.len(), self.dim);
        let mut acc = ZERO;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += psi[i].conj() * self.entries[(i, j)] * psi[j];
            }
        }
        acc
    }

    pub fn matmul(&self, other: &LocalOperator) -> LocalOperator {
        LocalOperator::new(
            format!("{}*{}", self.name, other.name),
            &self.entries * &other.entries,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_hermitian() {
        for op in [
            LocalOperator::sigma_x(),
            LocalOperator::sigma_y(),
            LocalOperator::sigma_z(),
            LocalOperator::charge(),
        ] {
            assert!(op.is_hermitian(1e-14), "{}", op.name);
        }
        for k in 1..=8 {
            assert!(LocalOperator::gell_mann(k).is_hermitian(1e-14));
        }
    }

    #[test]
    fn gell_mann_normalization_and_tracelessness() {
        // Tr(lambda_a lambda_b) = 2 delta_ab
        for a in 1..=8 {
            let la = LocalOperator::gell_mann(a);
            assert!(la.entries.trace().norm() < 1e-14);
            for b in 1..=8 {
                let lb = LocalOperator::gell_mann(b);
                let tr = (&la.entries * &lb.entries).trace();
                let expect = if a == b { 2.0 } else { 0.0 };
                assert!((tr - Complex64::new(expect, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn qubit_block_of_gell_mann_matches_paulis() {
        let pairs = [
            (1, LocalOperator::sigma_x()),
            (2, LocalOperator::sigma_y()),
            (3, LocalOperator::sigma_z()),
        ];
        for (k, s) in pairs {
            let l = LocalOperator::gell_mann(k);
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(l.entries[(i, j)], s.entries[(i, j)]);
                }
                assert_eq!(l.entries[(i, 2)], ZERO);
                assert_eq!(l.entries[(2, i)], ZERO);
            }
        }
    }

    #[test]
    fn charge_commutes_with_qubit_generators() {
        let q = LocalOperator::charge();
        for k in [1, 2, 3, 8] {
            let l = LocalOperator::gell_mann(k);
            let c = &l.entries * &q.entries - &q.entries * &l.entries;
            assert!(c.iter().all(|z| z.norm() == 0.0));
        }
    }
}
