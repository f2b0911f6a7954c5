//! Energy-basis matrix elements and ETH statistics.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::entanglement::EigenstateReductions;
use crate::error::{Error, Result};
use crate::lattice::{embed_at_site, LocalOperator, OperatorMatrix};
use crate::spectral::{Eigenvectors, Spectrum};

/// Operator matrix in the energy eigenbasis, rows and columns ordered by
/// ascending energy.
#[derive(Clone, Debug)]
pub struct EthMatrixData {
    pub elements: DMatrix<Complex64>,
    pub energies: Vec<f64>,
    /// S(E) used for reference lines: ln of the Hilbert-space dimension.
    pub entropy_scale: f64,
}

impl EthMatrixData {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                worst = worst.max((self.elements[(i, j)] - self.elements[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

/// Eigenvector matrix with columns permuted into ascending-energy order.
pub fn sorted_eigenbasis(spectrum: &Spectrum) -> Result<(Vec<f64>, Eigenvectors)> {
    let order = spectrum.sorted_order();
    let e = spectrum.energies();
    let energies = order.iter().map(|&i| e[i]).collect();
    let v = match spectrum.dense_eigenbasis()? {
        Eigenvectors::Real(m) => Eigenvectors::Real(m.select_columns(order.iter())),
        Eigenvectors::Complex(m) => Eigenvectors::Complex(m.select_columns(order.iter())),
    };
    Ok((energies, v))
}

/// `V^dagger O V`.
pub fn energy_basis_elements(spectrum: &Spectrum, op: &OperatorMatrix) -> Result<EthMatrixData> {
    let (energies, v) = sorted_eigenbasis(spectrum)?;
    elements_in_basis(&energies, &v, op)
}

/// As [`energy_basis_elements`] with a precomputed sorted eigenbasis, for
/// evaluating many operators on one spectrum.
pub fn elements_in_basis(energies: &[f64], v: &Eigenvectors, op: &OperatorMatrix) -> Result<EthMatrixData> {
    if op.dim() != v.nrows() {
        return Err(Error::DimensionMismatch {
            expected: v.nrows(),
            actual: op.dim(),
        });
    }
    Ok(EthMatrixData {
        elements: v.sandwich(op),
        energies: energies.to_vec(),
        entropy_scale: (energies.len() as f64).ln(),
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScatterPoint {
    pub energy: f64,
    pub value: f64,
    /// Index of the symmetry block the eigenstate belongs to.
    pub block: usize,
}

pub enum ScatterQuantity<'a> {
    Expectation(&'a OperatorMatrix),
    /// Entanglement entropy (bits) of the listed sites.
    Entropy(&'a [usize]),
}

/// Per-eigenstate values paired with energies, sorted by energy.
pub fn eigenstate_scatter(spectrum: &Spectrum, quantity: ScatterQuantity) -> Result<Vec<ScatterPoint>> {
    let values = match quantity {
        ScatterQuantity::Expectation(op) => spectrum.diagonal_elements(op)?,
        ScatterQuantity::Entropy(sites) => EigenstateReductions::new(spectrum, sites)?.entropies()?,
    };
    let e = spectrum.energies();
    Ok(spectrum
        .sorted_order()
        .into_iter()
        .map(|i| ScatterPoint {
            energy: e[i],
            value: values[i],
            block: spectrum.locate(i).0,
        })
        .collect())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Ratio {
    /// Mean |diagonal| over mean |off-diagonal|; infinite when the latter vanishes.
    pub ratio: f64,
    pub infinite: bool,
}

pub fn diag_offdiag_ratio(data: &EthMatrixData) -> Result<Ratio> {
    let n = data.dim();
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    let mut diag = 0.0;
    let mut off = 0.0;
    for j in 0..n {
        for i in 0..n {
            let a = data.elements[(i, j)].norm();
            if i == j {
                diag += a;
            } else {
                off += a;
            }
        }
    }
    let diag = diag / n as f64;
    let off = off / (n * (n - 1)) as f64;
    // off-diagonal noise at round-off level counts as zero
    let scale = diag.max(f64::MIN_POSITIVE);
    if off <= 1e-13 * scale {
        return Ok(Ratio {
            ratio: f64::INFINITY,
            infinite: true,
        });
    }
    Ok(Ratio {
        ratio: diag / off,
        infinite: false,
    })
}

/// `(1/N) sum_i |O_{i, N+1-i}|` (1-based) for a qubit-chain space of size `N = 2^L`.
pub fn counter_diagonal_average(data: &EthMatrixData) -> Result<f64> {
    let n = data.dim();
    if !n.is_power_of_two() || n < 2 {
        return Err(Error::NotPowerOfTwo(n));
    }
    Ok((0..n).map(|i| data.elements[(i, n - 1 - i)].norm()).sum::<f64>() / n as f64)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Ordinary least squares of `value` (or `ln value`) against `x`.
pub fn scaling_fit(points: &[(f64, f64)], log_scale: bool) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints(points.len()));
    }
    let ys: Vec<f64> = points
        .iter()
        .map(|&(_, y)| {
            if log_scale {
                if y <= 0.0 {
                    Err(Error::NonPositive(y))
                } else {
                    Ok(y.ln())
                }
            } else {
                Ok(y)
            }
        })
        .collect::<Result<_>>()?;
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().zip(&ys).map(|(p, y)| (p.0 - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidSpec("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (points
        .iter()
        .zip(&ys)
        .map(|(p, y)| (y - slope * p.0 - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ScalingFit {
        slope,
        intercept,
        residual,
    })
}

/// Single-qubit operator `U^dagger diag(-1, 1) U` with Haar-random `U`
/// (equivalently `n . sigma` with `n` uniform on the sphere), placed at a
/// uniformly random site.
pub fn random_fixed_spectrum_operator<R: Rng>(sites: usize, rng: &mut R) -> Result<(usize, OperatorMatrix)> {
    let site = rng.random_range(1..=sites);
    let mut n = [0.0f64; 3];
    loop {
        for x in &mut n {
            *x = rng.sample(StandardNormal);
        }
        let r = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if r > 1e-12 {
            n.iter_mut().for_each(|x| *x /= r);
            break;
        }
    }
    let m = LocalOperator::sigma_x().entries * Complex64::new(n[0], 0.0)
        + LocalOperator::sigma_y().entries * Complex64::new(n[1], 0.0)
        + LocalOperator::sigma_z().entries * Complex64::new(n[2], 0.0);
    let op = LocalOperator::new("n_dot_sigma", m);
    Ok((site, embed_at_site(&op, site, sites, 2)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::HamiltonianSpec;
    use crate::sectors::Symmetry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qubit(l: usize) -> (HamiltonianSpec, Spectrum) {
        let spec = HamiltonianSpec::qubit(l);
        let s = Spectrum::build(&spec, &[Symmetry::Parity]).unwrap();
        (spec, s)
    }

    #[test]
    fn hamiltonian_is_diagonal_in_its_basis() {
        let (spec, s) = qubit(5);
        let h = spec.build().unwrap();
        let d = energy_basis_elements(&s, &h).unwrap();
        for i in 0..32 {
            for j in 0..32 {
                let want = if i == j { d.energies[i] } else { 0.0 };
                assert!((d.elements[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-10);
            }
        }
        assert!(d.energies.windows(2).all(|w| w[0] <= w[1]));
        assert!(counter_diagonal_average(&d).unwrap() < 1e-10);
        let id = energy_basis_elements(&s, &OperatorMatrix::identity(32)).unwrap();
        assert!(diag_offdiag_ratio(&id).unwrap().infinite);
    }

    #[test]
    fn transform_matches_dense_product_and_keeps_spectrum() {
        let (_, s) = qubit(6);
        let op = embed_at_site(&LocalOperator::sigma_x(), 1, 6, 2).unwrap();
        let d = energy_basis_elements(&s, &op).unwrap();
        assert!(d.hermiticity_error() < 1e-10);
        let (_, v) = sorted_eigenbasis(&s).unwrap();
        let vc = v.to_complex();
        let direct = vc.adjoint() * op.to_dense() * &vc;
        assert!((direct - &d.elements).iter().all(|z| z.norm() < 1e-9));
        let mut ev: Vec<f64> = d.elements.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] + 1.0).abs() < 1e-9 && (ev[63] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ratio_is_phase_invariant() {
        let (_, s) = qubit(5);
        let op = embed_at_site(&LocalOperator::sigma_x(), 2, 5, 2).unwrap();
        let d = energy_basis_elements(&s, &op).unwrap();
        let r0 = diag_offdiag_ratio(&d).unwrap().ratio;
        let phases: Vec<Complex64> = (0..32).map(|k| Complex64::from_polar(1.0, 0.3 * k as f64)).collect();
        let mut rotated = d.clone();
        for i in 0..32 {
            for j in 0..32 {
                rotated.elements[(i, j)] = phases[i].conj() * d.elements[(i, j)] * phases[j];
            }
        }
        assert!((diag_offdiag_ratio(&rotated).unwrap().ratio - r0).abs() < 1e-12);
    }

    #[test]
    fn counter_diagonal_is_bounded_by_operator_norm() {
        let (_, s) = qubit(6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let (_, op) = random_fixed_spectrum_operator(6, &mut rng).unwrap();
            let d = energy_basis_elements(&s, &op).unwrap();
            assert!(counter_diagonal_average(&d).unwrap() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn non_power_of_two_rejected() {
        let spec = HamiltonianSpec::qutrit(2, 1.0, 0);
        let s = Spectrum::build(&spec, &[Symmetry::Charge]).unwrap();
        let d = energy_basis_elements(&s, &OperatorMatrix::identity(9)).unwrap();
        assert!(matches!(counter_diagonal_average(&d), Err(Error::NotPowerOfTwo(9))));
    }

    #[test]
    fn random_operator_has_pauli_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (site, op) = random_fixed_spectrum_operator(4, &mut rng).unwrap();
        assert!((1..=4).contains(&site));
        assert!(op.is_hermitian(1e-14));
        let sq = op.matmul(&op);
        let id = OperatorMatrix::identity(16);
        assert!(sq.sub(&id).max_abs() < 1e-14);
        assert!(op.trace().norm() < 1e-14);
    }

    #[test]
    fn fits() {
        let pts: Vec<(f64, f64)> = (4..=10).map(|l| (l as f64, (-0.4 * l as f64).exp())).collect();
        let f = scaling_fit(&pts, true).unwrap();
        assert!((f.slope + 0.4).abs() < 1e-12 && f.residual < 1e-12);
        let flat: Vec<(f64, f64)> = (0..5).map(|l| (l as f64, 2.5)).collect();
        assert_eq!(scaling_fit(&flat, false).unwrap().slope, 0.0);
        assert!(matches!(scaling_fit(&pts[..2], false), Err(Error::TooFewPoints(2))));
        assert!(matches!(scaling_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)], true), Err(Error::NonPositive(_))));
    }

    #[test]
    fn scatter_of_h_lies_on_diagonal() {
        let (spec, s) = qubit(5);
        let h = spec.build().unwrap();
        let pts = eigenstate_scatter(&s, ScatterQuantity::Expectation(&h)).unwrap();
        assert!(pts.iter().all(|p| (p.energy - p.value).abs() < 1e-10));
        let ent = eigenstate_scatter(&s, ScatterQuantity::Entropy(&[1])).unwrap();
        assert!(ent.iter().all(|p| (0.0..=1.0 + 1e-12).contains(&p.value)));
    }
}
