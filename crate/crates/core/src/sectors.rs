//! Symmetry sectors: parity (site reversal) and total qutrit charge.
//!
//! Sectors are built structurally from the computational basis: charge by
//! counting trits equal to 2, parity from orbit pairs {b, reverse(b)}. Neither
//! symmetry operator is ever diagonalized numerically.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{build_charge_operators, charge_of_index, digits, index_of, OperatorMatrix};

/// Commutator tolerance for symmetry checks (max-entry norm).
pub const COMMUTATION_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SectorLabel {
    pub parity: Option<i8>,
    pub charge: Option<usize>,
}

impl SectorLabel {
    pub fn new(parity: Option<i8>, charge: Option<usize>) -> Result<Self> {
        if parity.is_none() && charge.is_none() {
            return Err(Error::InvalidSpec("sector label needs a parity or a charge".into()));
        }
        if let Some(p) = parity {
            if p != 1 && p != -1 {
                return Err(Error::InvalidSpec(format!("parity must be +1 or -1, got {p}")));
            }
        }
        Ok(Self { parity, charge })
    }

    pub fn parity(p: i8) -> Self {
        Self::new(Some(p), None).expect("parity is +-1")
    }

    pub fn charge(q: usize) -> Self {
        Self {
            parity: None,
            charge: Some(q),
        }
    }

    /// Checks the charge against the chain length.
    pub fn validate(&self, sites: usize) -> Result<()> {
        Self::new(self.parity, self.charge)?;
        match self.charge {
            Some(q) if q > sites => Err(Error::InvalidSpec(format!("charge {q} exceeds {sites} sites"))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SectorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(p) = self.parity {
            parts.push(if p > 0 { "P+".to_string() } else { "P-".to_string() });
        }
        if let Some(q) = self.charge {
            parts.push(format!("Q{q}"));
        }
        write!(f, "{}", parts.join("_"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    Parity,
    Charge,
}

/// Orthonormal columns spanning a sector, each a combination of at most two
/// computational basis states with real coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorBasis {
    full_dim: usize,
    columns: Vec<Vec<(usize, f64)>>,
}

impl SectorBasis {
    pub fn new(full_dim: usize, columns: Vec<Vec<(usize, f64)>>) -> Self {
        Self { full_dim, columns }
    }

    pub fn identity(full_dim: usize) -> Self {
        Self::new(full_dim, (0..full_dim).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn full_dim(&self) -> usize {
        self.full_dim
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<(usize, f64)>] {
        &self.columns
    }

    pub fn is_identity(&self) -> bool {
        self.columns.len() == self.full_dim
            && self
                .columns
                .iter()
                .enumerate()
                .all(|(i, c)| c.len() == 1 && c[0] == (i, 1.0))
    }

    /// `B^dagger psi`: sector amplitudes of a full-space vector.
    pub fn restrict(&self, psi: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(psi.len(), self.full_dim);
        self.columns
            .iter()
            .map(|col| col.iter().map(|&(i, a)| psi[i] * a).sum())
            .collect()
    }

    /// `B x`: full-space vector from sector amplitudes.
    pub fn embed(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.full_dim];
        self.embed_into(x, &mut out);
        out
    }

    /// Adds `B x` into `out`.
    pub fn embed_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        assert_eq!(x.len(), self.dim());
        for (col, &v) in self.columns.iter().zip(x) {
            for &(i, a) in col {
                out[i] += v * a;
            }
        }
    }

    /// `B^dagger O B` as a sparse sector-space operator.
    pub fn restrict_operator(&self, op: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(op.dim(), self.full_dim);
        let mut lookup: Vec<Option<(usize, f64)>> = vec![None; self.full_dim];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, a) in col {
                lookup[i] = Some((j, a));
            }
        }
        // rows of B^dagger O B: sum over entries of column r of B and row entries of O
        let mut triplets = Vec::new();
        for (r, col) in self.columns.iter().enumerate() {
            for &(i, a) in col {
                for (k, v) in op.row(i) {
                    if let Some((c, b)) = lookup[k] {
                        triplets.push((r, c, v * (a * b)));
                    }
                }
            }
        }
        OperatorMatrix::from_triplets(self.dim(), triplets)
    }

    /// Max deviation of `B^dagger B` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut lookup: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.full_dim];
        for (j, col) in self.columns.iter().enumerate() {
            for &(i, a) in col {
                lookup[i].push((j, a));
            }
        }
        let mut worst: f64 = 0.0;
        for (j, col) in self.columns.iter().enumerate() {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            for &(i, a) in col {
                for &(k, b) in &lookup[i] {
                    *acc.entry(k).or_default() += a * b;
                }
            }
            for (k, v) in acc {
                let target = if k == j { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
            if col.is_empty() {
                worst = worst.max(1.0);
            }
        }
        worst
    }
}

/// One symmetry block of a Hamiltonian.
#[derive(Clone, Debug)]
pub struct SectorBlock {
    pub label: SectorLabel,
    pub basis: SectorBasis,
    pub block: OperatorMatrix,
}

impl SectorBlock {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
}

fn reverse_index(index: usize, sites: usize, dim: usize) -> usize {
    let mut d = digits(index, sites, dim);
    d.reverse();
    index_of(&d, dim)
}

/// Site-reversal permutation r -> L + 1 - r.
pub fn build_parity(sites: usize, dim: usize) -> OperatorMatrix {
    let full = dim.pow(sites as u32);
    OperatorMatrix::from_triplets(
        full,
        (0..full)
            .map(|b| (reverse_index(b, sites, dim), b, Complex64::new(1.0, 0.0)))
            .collect(),
    )
}

pub fn symmetry_operator(sym: Symmetry, sites: usize, dim: usize) -> Result<OperatorMatrix> {
    match sym {
        Symmetry::Parity => Ok(build_parity(sites, dim)),
        Symmetry::Charge => {
            if dim != 3 {
                return Err(Error::NotQutrit);
            }
            Ok(build_charge_operators(sites)?.1)
        }
    }
}

/// Splits `h` into blocks labelled by the joint eigenvalues of `symmetries`.
pub fn decompose(h: &OperatorMatrix, sites: usize, dim: usize, symmetries: &[Symmetry]) -> Result<Vec<SectorBlock>> {
    let full = dim.pow(sites as u32);
    if h.dim() != full {
        return Err(Error::DimensionMismatch {
            expected: full,
            actual: h.dim(),
        });
    }
    if symmetries.is_empty() {
        return Err(Error::InvalidSpec("decompose needs at least one symmetry".into()));
    }
    let ops = symmetries
        .iter()
        .map(|&s| symmetry_operator(s, sites, dim))
        .collect::<Result<Vec<_>>>()?;
    for op in &ops {
        let norm = h.commutator(op).max_abs();
        if norm > COMMUTATION_TOL {
            return Err(Error::NonCommuting { norm });
        }
    }
    for (i, a) in ops.iter().enumerate() {
        for b in &ops[i + 1..] {
            let norm = a.commutator(b).max_abs();
            if norm > COMMUTATION_TOL {
                return Err(Error::SymmetriesNonCommuting { norm });
            }
        }
    }

    let use_parity = symmetries.contains(&Symmetry::Parity);
    let use_charge = symmetries.contains(&Symmetry::Charge);
    let mut groups: BTreeMap<SectorLabel, Vec<Vec<(usize, f64)>>> = BTreeMap::new();
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    for b in 0..full {
        let charge = use_charge.then(|| charge_of_index(b, sites));
        if use_parity {
            let rb = reverse_index(b, sites, dim);
            if rb < b {
                continue;
            }
            let plus = SectorLabel { parity: Some(1), charge };
            if rb == b {
                groups.entry(plus).or_default().push(vec![(b, 1.0)]);
            } else {
                groups
                    .entry(plus)
                    .or_default()
                    .push(vec![(b, inv_sqrt2), (rb, inv_sqrt2)]);
                let minus = SectorLabel { parity: Some(-1), charge };
                groups
                    .entry(minus)
                    .or_default()
                    .push(vec![(b, inv_sqrt2), (rb, -inv_sqrt2)]);
            }
        } else {
            let label = SectorLabel { parity: None, charge };
            groups.entry(label).or_default().push(vec![(b, 1.0)]);
        }
    }

    Ok(groups
        .into_iter()
        .map(|(label, columns)| {
            let basis = SectorBasis::new(full, columns);
            let block = basis.restrict_operator(h);
            SectorBlock { label, basis, block }
        })
        .collect())
}

/// Dimension of the total-charge-n sector of an L-qutrit chain, 2^(L-n) C(L, n).
pub fn charge_sector_dim(sites: usize, n: usize) -> usize {
    if n > sites {
        return 0;
    }
    let mut binom = 1usize;
    for k in 0..n {
        binom = binom * (sites - k) / (k + 1);
    }
    binom << (sites - n)
}
