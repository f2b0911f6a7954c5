//! Reduced density matrices and von Neumann entropy (bits).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectral::Spectrum;

const TRACE_TOL: f64 = 1e-8;
const NEGATIVE_ERROR: f64 = -1e-8;
const SKIP: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct ReducedDensityMatrix {
    pub sites: Vec<usize>,
    pub matrix: DMatrix<Complex64>,
}

impl ReducedDensityMatrix {
    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn entropy(&self) -> Result<f64> {
        von_neumann_entropy(self)
    }

    /// Eigenvalues with roundoff negatives clamped to zero.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let herm = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        let mut out = Vec::with_capacity(herm.nrows());
        for &l in herm.symmetric_eigenvalues().iter() {
            if l < NEGATIVE_ERROR {
                return Err(Error::InvalidDensityMatrix(format!("eigenvalue {l:.3e} is negative")));
            }
            out.push(l.max(0.0));
        }
        Ok(out)
    }
}

/// Splits every basis index into (subsystem index, complement index).
/// Precomputed once per (sites, L, d).
#[derive(Clone, Debug)]
pub struct Bipartition {
    pub sites: Vec<usize>,
    sub_dim: usize,
    env_dim: usize,
    sub_index: Vec<u32>,
    env_index: Vec<u32>,
}

impl Bipartition {
    pub fn new(sites: &[usize], n_sites: usize, d: usize) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidSites("empty site list".into()));
        }
        let mut seen = vec![false; n_sites + 1];
        for &s in sites {
            if s == 0 || s > n_sites {
                return Err(Error::SiteOutOfRange { site: s, sites: n_sites });
            }
            if seen[s] {
                return Err(Error::InvalidSites(format!("site {s} repeated")));
            }
            seen[s] = true;
        }
        let k = sites.len();
        let sub_dim = d.pow(k as u32);
        let env_dim = d.pow((n_sites - k) as u32);
        let full = sub_dim * env_dim;
        let mut sub_index = vec![0u32; full];
        let mut env_index = vec![0u32; full];
        let env_sites: Vec<usize> = (1..=n_sites).filter(|s| !seen[*s]).collect();
        let digit = |idx: usize, site: usize| (idx / d.pow((n_sites - site) as u32)) % d;
        for idx in 0..full {
            let mut a = 0;
            for &s in sites {
                a = a * d + digit(idx, s);
            }
            let mut b = 0;
            for &s in &env_sites {
                b = b * d + digit(idx, s);
            }
            sub_index[idx] = a as u32;
            env_index[idx] = b as u32;
        }
        Ok(Self {
            sites: sites.to_vec(),
            sub_dim,
            env_dim,
            sub_index,
            env_index,
        })
    }

    pub fn full_dim(&self) -> usize {
        self.sub_index.len()
    }

    /// Accumulates `weight * Tr_env |psi><psi|` into `acc`.
    pub fn accumulate(&self, psi: &[Complex64], weight: f64, acc: &mut DMatrix<Complex64>) {
        let mut m = DMatrix::<Complex64>::zeros(self.sub_dim, self.env_dim);
        for (idx, amp) in psi.iter().enumerate() {
            m[(self.sub_index[idx] as usize, self.env_index[idx] as usize)] = *amp;
        }
        let rho = &m * m.adjoint();
        *acc += rho * Complex64::new(weight, 0.0);
    }

    pub fn reduce(&self, psi: &[Complex64]) -> Result<ReducedDensityMatrix> {
        if psi.len() != self.full_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.full_dim(),
                actual: psi.len(),
            });
        }
        let mut acc = DMatrix::zeros(self.sub_dim, self.sub_dim);
        self.accumulate(psi, 1.0, &mut acc);
        Ok(ReducedDensityMatrix {
            sites: self.sites.clone(),
            matrix: acc,
        })
    }
}

/// Partial trace of a pure state over the complement of `sites` (1-based).
pub fn reduce(psi: &[Complex64], sites: &[usize], n_sites: usize, d: usize) -> Result<ReducedDensityMatrix> {
    Bipartition::new(sites, n_sites, d)?.reduce(psi)
}

/// `Tr_env sum_i w_i |E_i><E_i|` with weights in the spectrum's flat order.
pub fn mixed_reduce(weights: &[f64], spectrum: &Spectrum, sites: &[usize]) -> Result<ReducedDensityMatrix> {
    if weights.len() != spectrum.full_dim() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.full_dim(),
            actual: weights.len(),
        });
    }
    let part = Bipartition::new(sites, spectrum.sites, spectrum.site_dim)?;
    let wmax = weights.iter().copied().fold(0.0, f64::max);
    let active: Vec<usize> = (0..weights.len())
        .filter(|&i| weights[i] > 1e-18 * wmax)
        .collect();
    // chunks are summed in a fixed order so the result is thread-count independent
    let partials: Vec<DMatrix<Complex64>> = active
        .par_chunks(64)
        .map(|chunk| {
            let mut acc = DMatrix::zeros(part.sub_dim, part.sub_dim);
            for &i in chunk {
                part.accumulate(&spectrum.eigenvector_full(i), weights[i], &mut acc);
            }
            acc
        })
        .collect();
    let mut total = DMatrix::zeros(part.sub_dim, part.sub_dim);
    for p in partials {
        total += p;
    }
    Ok(ReducedDensityMatrix {
        sites: sites.to_vec(),
        matrix: total,
    })
}

/// Reduced matrices of every eigenstate on a fixed site set, cached so that
/// many mixtures (thermal grids, scatter plots) cost only weighted sums.
#[derive(Clone, Debug)]
pub struct EigenstateReductions {
    pub sites: Vec<usize>,
    pub matrices: Vec<DMatrix<Complex64>>,
}

impl EigenstateReductions {
    pub fn new(spectrum: &Spectrum, sites: &[usize]) -> Result<Self> {
        let part = Bipartition::new(sites, spectrum.sites, spectrum.site_dim)?;
        let matrices = (0..spectrum.full_dim())
            .into_par_iter()
            .map(|i| {
                let mut acc = DMatrix::zeros(part.sub_dim, part.sub_dim);
                part.accumulate(&spectrum.eigenvector_full(i), 1.0, &mut acc);
                acc
            })
            .collect();
        Ok(Self {
            sites: sites.to_vec(),
            matrices,
        })
    }

    pub fn mix(&self, weights: &[f64]) -> Result<ReducedDensityMatrix> {
        if weights.len() != self.matrices.len() {
            return Err(Error::DimensionMismatch {
                expected: self.matrices.len(),
                actual: weights.len(),
            });
        }
        let k = self.matrices[0].nrows();
        let mut total = DMatrix::zeros(k, k);
        for (w, m) in weights.iter().zip(&self.matrices) {
            if *w != 0.0 {
                total += m * Complex64::new(*w, 0.0);
            }
        }
        Ok(ReducedDensityMatrix {
            sites: self.sites.clone(),
            matrix: total,
        })
    }

    /// Entanglement entropy of each eigenstate, flat order.
    pub fn entropies(&self) -> Result<Vec<f64>> {
        self.matrices
            .iter()
            .map(|m| {
                von_neumann_entropy(&ReducedDensityMatrix {
                    sites: self.sites.clone(),
                    matrix: m.clone(),
                })
            })
            .collect()
    }
}

/// `-sum lambda log2 lambda`, skipping eigenvalues below 1e-14.
pub fn von_neumann_entropy(rho: &ReducedDensityMatrix) -> Result<f64> {
    let tr = rho.trace();
    if (tr - 1.0).abs() > TRACE_TOL {
        return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
    }
    let s = rho
        .eigenvalues()?
        .into_iter()
        .filter(|&l| l > SKIP)
        .map(|l| -l * l.log2())
        .sum::<f64>();
    Ok(s.max(0.0))
}
