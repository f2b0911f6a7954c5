use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::eigh::{eigh_complex, eigh_real};
use super::gemm::{gemm_complex, gemm_real};
use crate::error::{Error, Result};
use crate::lattice::{HamiltonianSpec, OperatorMatrix};
use crate::sectors::{decompose, SectorBasis, SectorBlock, SectorLabel, Symmetry};

/// Largest block that will be densified for diagonalization.
pub const DENSE_LIMIT: usize = 20_000;

/// Eigenvector columns, kept real when the block is real symmetric.
#[derive(Clone, Debug)]
pub enum Eigenvectors {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

fn split(m: &DMatrix<Complex64>) -> (DMatrix<f64>, DMatrix<f64>) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

fn join(re: DMatrix<f64>, im: DMatrix<f64>) -> DMatrix<Complex64> {
    re.zip_map(&im, Complex64::new)
}

impl Eigenvectors {
    pub fn nrows(&self) -> usize {
        match self {
            Eigenvectors::Real(v) => v.nrows(),
            Eigenvectors::Complex(v) => v.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Eigenvectors::Real(v) => v.ncols(),
            Eigenvectors::Complex(v) => v.ncols(),
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self, Eigenvectors::Real(_))
    }

    pub fn column(&self, i: usize) -> Vec<Complex64> {
        match self {
            Eigenvectors::Real(v) => v.column(i).iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            Eigenvectors::Complex(v) => v.column(i).iter().copied().collect(),
        }
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        match self {
            Eigenvectors::Real(v) => v.map(|x| Complex64::new(x, 0.0)),
            Eigenvectors::Complex(v) => v.clone(),
        }
    }

    /// `V^dagger X` for a complex matrix `X`.
    pub fn adjoint_mul(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        match self {
            Eigenvectors::Real(v) => {
                let (re, im) = split(x);
                join(gemm_real(v, true, &re), gemm_real(v, true, &im))
            }
            Eigenvectors::Complex(v) => gemm_complex(v, true, x),
        }
    }

    /// `V X` for a complex matrix `X`.
    pub fn mul(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        match self {
            Eigenvectors::Real(v) => {
                let (re, im) = split(x);
                join(gemm_real(v, false, &re), gemm_real(v, false, &im))
            }
            Eigenvectors::Complex(v) => gemm_complex(v, false, x),
        }
    }

    /// `V^dagger O V` for a sparse operator in the same basis as the rows.
    pub fn sandwich(&self, op: &OperatorMatrix) -> DMatrix<Complex64> {
        assert_eq!(op.dim(), self.nrows());
        match self {
            Eigenvectors::Real(v) => {
                let (ore, oim) = sparse_times_real(op, v);
                let re = gemm_real(v, true, &ore);
                if op.is_real() {
                    re.map(|x| Complex64::new(x, 0.0))
                } else {
                    join(re, gemm_real(v, true, &oim))
                }
            }
            Eigenvectors::Complex(v) => {
                let n = v.nrows();
                let mut ov = DMatrix::<Complex64>::zeros(n, v.ncols());
                for j in 0..v.ncols() {
                    let col = v.column(j);
                    let mut target = ov.column_mut(j);
                    for (r, c, val) in op.triplets() {
                        target[r] += val * col[c];
                    }
                }
                gemm_complex(v, true, &ov)
            }
        }
    }
}

/// `O V` split into real and imaginary parts, for real `V`.
fn sparse_times_real(op: &OperatorMatrix, v: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = v.nrows();
    let mut re = DMatrix::<f64>::zeros(n, v.ncols());
    let mut im = DMatrix::<f64>::zeros(n, v.ncols());
    let trip: Vec<(usize, usize, Complex64)> = op.triplets().collect();
    for j in 0..v.ncols() {
        let col = v.column(j);
        for &(r, c, val) in &trip {
            re[(r, j)] += val.re * col[c];
            im[(r, j)] += val.im * col[c];
        }
    }
    (re, im)
}

/// Eigendecomposition of one block (or of the full space).
#[derive(Clone, Debug)]
pub struct SpectralData {
    /// `None` for an unsectored spectrum.
    pub sector: Option<SectorLabel>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors expressed in `basis`.
    pub eigenvectors: Eigenvectors,
    pub basis: Arc<SectorBasis>,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn full_dim(&self) -> usize {
        self.basis.full_dim()
    }

    /// Eigenvector `i` in the sector basis.
    pub fn vector(&self, i: usize) -> Vec<Complex64> {
        self.eigenvectors.column(i)
    }

    /// Eigenvector `i` embedded in the full lattice space.
    pub fn full_vector(&self, i: usize) -> Vec<Complex64> {
        self.basis.embed(&self.vector(i))
    }

    /// `V^dagger x` for sector amplitudes `x`.
    pub fn to_energy_basis(&self, x: &[Complex64]) -> Vec<Complex64> {
        let m = DMatrix::from_column_slice(x.len(), 1, x);
        self.eigenvectors.adjoint_mul(&m).as_slice().to_vec()
    }

    /// `V c` for energy-basis coefficients `c`.
    pub fn from_energy_basis(&self, c: &[Complex64]) -> Vec<Complex64> {
        let m = DMatrix::from_column_slice(c.len(), 1, c);
        self.eigenvectors.mul(&m).as_slice().to_vec()
    }

    /// Largest residual `||H v - lambda v||` over all eigenpairs, with `H`
    /// given in the sector basis.
    pub fn max_residual(&self, block: &OperatorMatrix) -> f64 {
        (0..self.dim())
            .map(|i| {
                let v = self.vector(i);
                let hv = block.apply(&v);
                hv.iter()
                    .zip(&v)
                    .map(|(a, b)| (a - b * self.eigenvalues[i]).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Max deviation of `V^dagger V` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let v = self.eigenvectors.to_complex();
        let g = v.ad_mul(&v);
        let n = g.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

/// Full eigendecomposition of a block. Real blocks go through `dsyevd`,
/// complex ones through `zheevd`.
pub fn diagonalize(block: &SectorBlock) -> Result<SpectralData> {
    diagonalize_with_limit(block, DENSE_LIMIT)
}

pub fn diagonalize_with_limit(block: &SectorBlock, limit: usize) -> Result<SpectralData> {
    let dim = block.dim();
    if dim > limit {
        return Err(Error::DimensionLimit { dim, limit });
    }
    let (eigenvalues, eigenvectors) = if block.block.is_real() {
        let (w, v) = eigh_real(block.block.to_dense_real()?)?;
        (w, Eigenvectors::Real(v))
    } else {
        let (w, v) = eigh_complex(block.block.to_dense())?;
        (w, Eigenvectors::Complex(v))
    };
    Ok(SpectralData {
        sector: Some(block.label),
        eigenvalues,
        eigenvectors,
        basis: Arc::new(block.basis.clone()),
    })
}

/// Unsectored diagonalization of a full operator.
pub fn diagonalize_full(h: &OperatorMatrix) -> Result<SpectralData> {
    let block = SectorBlock {
        label: SectorLabel::charge(0),
        basis: SectorBasis::identity(h.dim()),
        block: h.clone(),
    };
    let mut data = diagonalize(&block)?;
    data.sector = None;
    Ok(data)
}

/// A complete eigendecomposition of a lattice Hamiltonian, possibly split
/// across symmetry blocks. Eigenstates carry a flat index running through
/// the blocks in order.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub sites: usize,
    pub site_dim: usize,
    pub blocks: Vec<SpectralData>,
    offsets: Vec<usize>,
}

impl Spectrum {
    pub fn new(sites: usize, site_dim: usize, blocks: Vec<SpectralData>) -> Result<Self> {
        let full = site_dim.pow(sites as u32);
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        offsets.push(0);
        for b in &blocks {
            if b.full_dim() != full {
                return Err(Error::DimensionMismatch {
                    expected: full,
                    actual: b.full_dim(),
                });
            }
            offsets.push(offsets.last().unwrap() + b.dim());
        }
        let total = *offsets.last().unwrap();
        if total != full {
            return Err(Error::DimensionMismatch {
                expected: full,
                actual: total,
            });
        }
        Ok(Self {
            sites,
            site_dim,
            blocks,
            offsets,
        })
    }

    /// Diagonalizes every block; blocks run in parallel, output order is the
    /// block order.
    pub fn from_blocks(sites: usize, site_dim: usize, blocks: &[SectorBlock]) -> Result<Self> {
        let data = blocks.par_iter().map(diagonalize).collect::<Result<Vec<_>>>()?;
        Self::new(sites, site_dim, data)
    }

    /// Builds and diagonalizes `spec`, split by `symmetries` (none = full space).
    pub fn build(spec: &HamiltonianSpec, symmetries: &[Symmetry]) -> Result<Self> {
        let h = spec.build()?;
        Self::from_operator(&h, spec.sites, spec.site_dim(), symmetries)
    }

    pub fn from_operator(h: &OperatorMatrix, sites: usize, site_dim: usize, symmetries: &[Symmetry]) -> Result<Self> {
        if symmetries.is_empty() {
            return Self::new(sites, site_dim, vec![diagonalize_full(h)?]);
        }
        let blocks = decompose(h, sites, site_dim, symmetries)?;
        Self::from_blocks(sites, site_dim, &blocks)
    }

    pub fn full_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.full_dim()
    }

    pub fn is_empty(&self) -> bool {
        self.full_dim() == 0
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// (block, index within block) for a flat eigenstate index.
    pub fn locate(&self, flat: usize) -> (usize, usize) {
        let b = self.offsets.partition_point(|&o| o <= flat) - 1;
        (b, flat - self.offsets[b])
    }

    pub fn energies(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.eigenvalues.iter().copied()).collect()
    }

    /// Total charge of each flat eigenstate, when the blocks carry charge labels.
    pub fn charges(&self) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(self.full_dim());
        for b in &self.blocks {
            let q = b.sector.and_then(|s| s.charge)? as f64;
            out.extend(std::iter::repeat_n(q, b.dim()));
        }
        Some(out)
    }

    /// Flat indices sorted by ascending energy (ties keep block order).
    pub fn sorted_order(&self) -> Vec<usize> {
        let e = self.energies();
        let mut idx: Vec<usize> = (0..e.len()).collect();
        idx.sort_by(|&a, &b| e[a].total_cmp(&e[b]));
        idx
    }

    pub fn min_energy(&self) -> f64 {
        self.energies().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max_energy(&self) -> f64 {
        self.energies().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn eigenvector_full(&self, flat: usize) -> Vec<Complex64> {
        let (b, i) = self.locate(flat);
        self.blocks[b].full_vector(i)
    }

    /// Energy-basis coefficients `c_i = <E_i|psi>` in flat order.
    pub fn project(&self, psi: &[Complex64]) -> Result<Vec<Complex64>> {
        if psi.len() != self.full_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.full_dim(),
                actual: psi.len(),
            });
        }
        let mut out = Vec::with_capacity(self.full_dim());
        for b in &self.blocks {
            out.extend(b.to_energy_basis(&b.basis.restrict(psi)));
        }
        Ok(out)
    }

    /// Full-space vector with energy-basis coefficients `coeffs`.
    pub fn reconstruct(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(coeffs.len(), self.full_dim());
        let mut out = vec![Complex64::new(0.0, 0.0); self.full_dim()];
        for (k, b) in self.blocks.iter().enumerate() {
            let c = &coeffs[self.offsets[k]..self.offsets[k + 1]];
            if c.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                continue;
            }
            b.basis.embed_into(&b.from_energy_basis(c), &mut out);
        }
        out
    }

    /// States `sum_i c_i e^{-i E_i t} |E_i>` for every `t`, one full-space
    /// vector per time.
    pub fn evolve_states(&self, coeffs: &[Complex64], times: &[f64]) -> Vec<Vec<Complex64>> {
        assert_eq!(coeffs.len(), self.full_dim());
        let mut out = vec![vec![Complex64::new(0.0, 0.0); self.full_dim()]; times.len()];
        for (k, b) in self.blocks.iter().enumerate() {
            let c = &coeffs[self.offsets[k]..self.offsets[k + 1]];
            if c.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
                continue;
            }
            let phased = DMatrix::from_fn(b.dim(), times.len(), |i, t| {
                c[i] * Complex64::from_polar(1.0, -b.eigenvalues[i] * times[t])
            });
            let sector_states = b.eigenvectors.mul(&phased);
            for (t, state) in out.iter_mut().enumerate() {
                b.basis
                    .embed_into(sector_states.column(t).as_slice(), state.as_mut_slice());
            }
        }
        out
    }

    /// Diagonal elements `<E_i|O|E_i>` in flat order.
    pub fn diagonal_elements(&self, op: &OperatorMatrix) -> Result<Vec<f64>> {
        if op.dim() != self.full_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.full_dim(),
                actual: op.dim(),
            });
        }
        let mut out = Vec::with_capacity(self.full_dim());
        for b in &self.blocks {
            let restricted = b.basis.restrict_operator(op);
            for i in 0..b.dim() {
                let v = b.vector(i);
                out.push(restricted.expectation(&v).re);
            }
        }
        Ok(out)
    }

    /// All eigenvectors as columns of one full-space matrix, in flat order.
    pub fn dense_eigenbasis(&self) -> Result<Eigenvectors> {
        let n = self.full_dim();
        if n > DENSE_LIMIT / 4 {
            return Err(Error::DimensionLimit {
                dim: n,
                limit: DENSE_LIMIT / 4,
            });
        }
        let all_real = self.blocks.iter().all(|b| b.eigenvectors.is_real());
        if all_real {
            let mut m = DMatrix::<f64>::zeros(n, n);
            for (k, b) in self.blocks.iter().enumerate() {
                let Eigenvectors::Real(v) = &b.eigenvectors else { unreachable!() };
                for (row, col) in b.basis.columns().iter().enumerate() {
                    for &(full, a) in col {
                        for i in 0..b.dim() {
                            m[(full, self.offsets[k] + i)] += a * v[(row, i)];
                        }
                    }
                }
            }
            Ok(Eigenvectors::Real(m))
        } else {
            let mut m = DMatrix::<Complex64>::zeros(n, n);
            for (k, b) in self.blocks.iter().enumerate() {
                let v = b.eigenvectors.to_complex();
                for (row, col) in b.basis.columns().iter().enumerate() {
                    for &(full, a) in col {
                        for i in 0..b.dim() {
                            m[(full, self.offsets[k] + i)] += v[(row, i)] * a;
                        }
                    }
                }
            }
            Ok(Eigenvectors::Complex(m))
        }
    }

    /// Smallest gap between distinct flat eigenstates relative to the spectral range.
    pub fn min_relative_gap(&self) -> f64 {
        let mut e = self.energies();
        e.sort_by(f64::total_cmp);
        let range = (e[e.len() - 1] - e[0]).max(f64::MIN_POSITIVE);
        e.windows(2).map(|w| (w[1] - w[0]) / range).fold(f64::INFINITY, f64::min)
    }
}
