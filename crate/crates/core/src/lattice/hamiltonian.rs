use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::local::LocalOperator;
use super::operator::OperatorMatrix;
use crate::error::{Error, Result};

/// Embeds `op` at `site` (1-based) of an `sites`-site chain with local
/// dimension `dim`. Site 1 is the most significant tensor factor.
pub fn embed_at_site(op: &LocalOperator, site: usize, sites: usize, dim: usize) -> Result<OperatorMatrix> {
    product_operator(&[(site, op)], sites, dim)
}

/// Tensor product of local operators on distinct sites, identity elsewhere.
pub fn product_operator(factors: &[(usize, &LocalOperator)], sites: usize, dim: usize) -> Result<OperatorMatrix> {
    let mut slots: Vec<Option<&LocalOperator>> = vec![None; sites];
    for &(site, op) in factors {
        if op.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: op.dim,
            });
        }
        if site == 0 || site > sites {
            return Err(Error::SiteOutOfRange { site, sites });
        }
        if slots[site - 1].is_some() {
            return Err(Error::InvalidSites(format!("site {site} repeated in product")));
        }
        slots[site - 1] = Some(op);
    }
    let mut acc = OperatorMatrix::identity(1);
    let mut pending_identity = 1usize;
    for slot in slots {
        match slot {
            None => pending_identity *= dim,
            Some(op) => {
                if pending_identity > 1 {
                    acc = acc.kron(&OperatorMatrix::identity(pending_identity));
                    pending_identity = 1;
                }
                acc = acc.kron(&OperatorMatrix::from_dense(&op.entries));
            }
        }
    }
    if pending_identity > 1 {
        acc = acc.kron(&OperatorMatrix::identity(pending_identity));
    }
    Ok(acc)
}

/// One product of local operators with a scalar coefficient.
#[derive(Clone, Debug)]
pub struct ProductTerm {
    pub coeff: Complex64,
    pub factors: Vec<(usize, LocalOperator)>,
}

/// Sum of product terms over a chain. Keeps the local structure around so
/// product-state expectation values can be evaluated without building the
/// full matrix.
#[derive(Clone, Debug)]
pub struct OperatorSum {
    pub sites: usize,
    pub site_dim: usize,
    pub terms: Vec<ProductTerm>,
}

impl OperatorSum {
    pub fn new(sites: usize, site_dim: usize) -> Self {
        Self {
            sites,
            site_dim,
            terms: Vec::new(),
        }
    }

    pub fn push(&mut self, coeff: f64, factors: Vec<(usize, LocalOperator)>) {
        if coeff != 0.0 {
            self.terms.push(ProductTerm {
                coeff: Complex64::new(coeff, 0.0),
                factors,
            });
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.terms {
            t.coeff *= s;
        }
    }

    pub fn to_matrix(&self) -> Result<OperatorMatrix> {
        let dim = self.site_dim.pow(self.sites as u32);
        let mut triplets = Vec::new();
        for term in &self.terms {
            let refs: Vec<(usize, &LocalOperator)> = term.factors.iter().map(|(s, o)| (*s, o)).collect();
            let m = product_operator(&refs, self.sites, self.site_dim)?;
            triplets.extend(m.triplets().map(|(r, c, v)| (r, c, v * term.coeff)));
        }
        Ok(OperatorMatrix::from_triplets(dim, triplets))
    }

    /// Expectation value in a product state given by one local vector per site.
    pub fn product_expectation(&self, local_states: &[Vec<Complex64>]) -> Complex64 {
        assert_eq!(local_states.len(), self.sites);
        self.terms
            .iter()
            .map(|t| {
                t.factors
                    .iter()
                    .fold(t.coeff, |acc, (site, op)| acc * op.expectation(&local_states[site - 1]))
            })
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainKind {
    Qubit,
    Qutrit,
}

impl ChainKind {
    pub fn site_dim(self) -> usize {
        match self {
            ChainKind::Qubit => 2,
            ChainKind::Qutrit => 3,
        }
    }
}

fn default_true() -> bool {
    true
}

/// Declarative description of a qubit or qutrit chain.
///
/// The field coefficients are shared between the two chains through the
/// embedding sigma_x -> lambda_1, sigma_y -> lambda_2, sigma_z -> lambda_3,
/// so `hx`/`hy`/`hz` are the `h1`/`h2`/`h3` of the qutrit model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    pub kind: ChainKind,
    pub sites: usize,
    #[serde(default = "HamiltonianSpec::default_j")]
    pub j: f64,
    #[serde(default = "HamiltonianSpec::default_hx", alias = "h1")]
    pub hx: f64,
    #[serde(default, alias = "h2")]
    pub hy: f64,
    #[serde(default = "HamiltonianSpec::default_hz", alias = "h3")]
    pub hz: f64,
    /// Charge-spreading strength (qutrit only).
    #[serde(default)]
    pub a: f64,
    #[serde(default = "HamiltonianSpec::default_spread_mean")]
    pub spread_mean: f64,
    #[serde(default = "HamiltonianSpec::default_spread_width")]
    pub spread_width: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub normalize_by_l: bool,
}

impl HamiltonianSpec {
    fn default_j() -> f64 {
        1.0
    }
    fn default_hx() -> f64 {
        1.05
    }
    fn default_hz() -> f64 {
        0.5
    }
    fn default_spread_mean() -> f64 {
        1.0
    }
    fn default_spread_width() -> f64 {
        0.1
    }

    /// Qubit chain with the chaotic coefficients J = 1, hx = 1.05, hz = 0.5.
    pub fn qubit(sites: usize) -> Self {
        Self {
            kind: ChainKind::Qubit,
            sites,
            j: 1.0,
            hx: 1.05,
            hy: 0.0,
            hz: 0.5,
            a: 0.0,
            spread_mean: 1.0,
            spread_width: 0.1,
            seed: 0,
            normalize_by_l: true,
        }
    }

    /// Qutrit chain with the chaotic qubit coefficients and charge spreading `a`.
    pub fn qutrit(sites: usize, a: f64, seed: u64) -> Self {
        Self {
            kind: ChainKind::Qutrit,
            a,
            seed,
            ..Self::qubit(sites)
        }
    }

    pub fn with_fields(mut self, hx: f64, hz: f64) -> Self {
        self.hx = hx;
        self.hz = hz;
        self
    }

    pub fn site_dim(&self) -> usize {
        self.kind.site_dim()
    }

    pub fn dim(&self) -> usize {
        self.site_dim().pow(self.sites as u32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 {
            return Err(Error::InvalidSpec(format!("need at least 2 sites, got {}", self.sites)));
        }
        if !(self.spread_width >= 0.0) || !self.spread_width.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "spread_width must be finite and >= 0, got {}",
                self.spread_width
            )));
        }
        for (name, v) in [
            ("j", self.j),
            ("hx", self.hx),
            ("hy", self.hy),
            ("hz", self.hz),
            ("a", self.a),
            ("spread_mean", self.spread_mean),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidSpec(format!("{name} is not finite")));
            }
        }
        if self.kind == ChainKind::Qubit && self.a != 0.0 {
            return Err(Error::InvalidSpec("charge spreading `a` is only defined for qutrit chains".into()));
        }
        Ok(())
    }

    /// Charge-spreading coefficients, one row of four per bond, drawn
    /// row-major from a single seeded stream.
    pub fn spread_coefficients(&self) -> Vec<[f64; 4]> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let normal = Normal::new(self.spread_mean, self.spread_width).expect("validated spread width");
        (0..self.sites - 1)
            .map(|_| std::array::from_fn(|_| normal.sample(&mut rng)))
            .collect()
    }

    fn scale(&self) -> f64 {
        if self.normalize_by_l {
            1.0 / self.sites as f64
        } else {
            1.0
        }
    }

    /// The Hamiltonian as a sum of local product terms.
    pub fn terms(&self) -> Result<OperatorSum> {
        self.validate()?;
        let l = self.sites;
        let (x, y, z) = match self.kind {
            ChainKind::Qubit => (LocalOperator::sigma_x(), LocalOperator::sigma_y(), LocalOperator::sigma_z()),
            ChainKind::Qutrit => (
                LocalOperator::gell_mann(1),
                LocalOperator::gell_mann(2),
                LocalOperator::gell_mann(3),
            ),
        };
        let mut sum = OperatorSum::new(l, self.site_dim());
        for r in 1..l {
            sum.push(self.j, vec![(r, z.clone()), (r + 1, z.clone())]);
        }
        for r in 1..=l {
            sum.push(self.hx, vec![(r, x.clone())]);
            sum.push(self.hy, vec![(r, y.clone())]);
            sum.push(self.hz, vec![(r, z.clone())]);
        }
        if self.kind == ChainKind::Qutrit && self.a != 0.0 {
            let spread = charge_spread_terms(l, &self.spread_coefficients())?;
            for mut t in spread.terms {
                t.coeff *= self.a;
                sum.terms.push(t);
            }
        }
        sum.scale(self.scale());
        Ok(sum)
    }

    pub fn build(&self) -> Result<OperatorMatrix> {
        self.terms()?.to_matrix()
    }
}

pub fn build_qubit_hamiltonian(spec: &HamiltonianSpec) -> Result<OperatorMatrix> {
    if spec.kind != ChainKind::Qubit {
        return Err(Error::InvalidSpec("expected a qubit chain".into()));
    }
    spec.build()
}

pub fn build_qutrit_hamiltonian(spec: &HamiltonianSpec) -> Result<OperatorMatrix> {
    if spec.kind != ChainKind::Qutrit {
        return Err(Error::InvalidSpec("expected a qutrit chain".into()));
    }
    spec.build()
}

/// The four two-site charge-transport operators, each a pair of products
/// of Gell-Mann matrices: (left index, right index) for both summands.
const SPREAD_PAIRS: [[(usize, usize); 2]; 4] = [
    [(4, 4), (5, 5)],
    [(4, 6), (5, 7)],
    [(6, 4), (7, 5)],
    [(6, 6), (7, 7)],
];

fn charge_spread_terms(sites: usize, coeffs: &[[f64; 4]]) -> Result<OperatorSum> {
    if coeffs.len() != sites.saturating_sub(1) {
        return Err(Error::CoefficientShape {
            rows: coeffs.len(),
            cols: 4,
            expected_rows: sites.saturating_sub(1),
        });
    }
    let mut sum = OperatorSum::new(sites, 3);
    for (bond, row) in coeffs.iter().enumerate() {
        let r = bond + 1;
        for (c, pairs) in row.iter().zip(SPREAD_PAIRS) {
            for (left, right) in pairs {
                sum.push(
                    *c,
                    vec![(r, LocalOperator::gell_mann(left)), (r + 1, LocalOperator::gell_mann(right))],
                );
            }
        }
    }
    Ok(sum)
}

/// Charge-spreading operator: sum over bonds of `c[r][i] * dq_i` on sites
/// (r, r+1). `coeffs` needs one row per bond.
pub fn build_charge_spread(sites: usize, coeffs: &[[f64; 4]]) -> Result<OperatorMatrix> {
    charge_spread_terms(sites, coeffs)?.to_matrix()
}

/// Same as [`build_charge_spread`] but accepts a ragged array, reporting
/// shape errors for rows that do not have four entries.
pub fn build_charge_spread_from_rows(sites: usize, coeffs: &[Vec<f64>]) -> Result<OperatorMatrix> {
    let mut rows = Vec::with_capacity(coeffs.len());
    for row in coeffs {
        let arr: [f64; 4] = row.as_slice().try_into().map_err(|_| Error::CoefficientShape {
            rows: coeffs.len(),
            cols: row.len(),
            expected_rows: sites.saturating_sub(1),
        })?;
        rows.push(arr);
    }
    build_charge_spread(sites, &rows)
}

/// Local charges q^(r) and their sum Q for a qutrit chain.
pub fn build_charge_operators(sites: usize) -> Result<(Vec<OperatorMatrix>, OperatorMatrix)> {
    let q = LocalOperator::charge();
    let local = (1..=sites)
        .map(|r| embed_at_site(&q, r, sites, 3))
        .collect::<Result<Vec<_>>>()?;
    let dim = 3usize.pow(sites as u32);
    let total = local.iter().fold(OperatorMatrix::zeros(dim), |acc, m| acc.add(m));
    Ok((local, total))
}

/// Number of trits equal to 2 in a basis index, i.e. its total charge.
pub fn charge_of_index(mut index: usize, sites: usize) -> usize {
    let mut count = 0;
    for _ in 0..sites {
        if index % 3 == 2 {
            count += 1;
        }
        index /= 3;
    }
    count
}

/// Digits of a basis index, site 1 first.
pub fn digits(mut index: usize, sites: usize, dim: usize) -> Vec<usize> {
    let mut out = vec![0; sites];
    for slot in out.iter_mut().rev() {
        *slot = index % dim;
        index /= dim;
    }
    out
}

pub fn index_of(digits: &[usize], dim: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * dim + d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    /// Brute-force index arithmetic: <a| prod_k op_k |b> = prod over sites.
    fn oracle_entry(factors: &[(usize, &LocalOperator)], sites: usize, dim: usize, a: usize, b: usize) -> Complex64 {
        let da = digits(a, sites, dim);
        let db = digits(b, sites, dim);
        let mut v = c(1.0);
        for s in 0..sites {
            match factors.iter().find(|(site, _)| *site == s + 1) {
                Some((_, op)) => v *= op.entries[(da[s], db[s])],
                None => {
                    if da[s] != db[s] {
                        return c(0.0);
                    }
                }
            }
        }
        v
    }

    #[test]
    fn embed_single_site_is_the_operator() {
        let sz = LocalOperator::sigma_z();
        let m = embed_at_site(&sz, 1, 1, 2).unwrap();
        assert_eq!(m.to_dense(), sz.entries);
    }

    #[test]
    fn site_one_is_most_significant() {
        let sz = LocalOperator::sigma_z();
        let m = embed_at_site(&sz, 1, 2, 2).unwrap();
        // |01> has index 1; site 1 holds 0 so sigma_z gives +1
        assert_eq!(m.get(1, 1), c(1.0));
        assert_eq!(m.get(2, 2), c(-1.0));
    }

    #[test]
    fn embed_lambda3_second_site() {
        let l3 = LocalOperator::gell_mann(3);
        let m = embed_at_site(&l3, 2, 2, 3).unwrap();
        // |0>⊗|1> -> index 1
        assert_eq!(m.get(1, 1), c(-1.0));
        for a in 0..9 {
            for b in 0..9 {
                assert_eq!(m.get(a, b), oracle_entry(&[(2, &l3)], 2, 3, a, b));
            }
        }
    }

    #[test]
    fn embed_errors() {
        let sz = LocalOperator::sigma_z();
        assert!(matches!(embed_at_site(&sz, 0, 2, 2), Err(Error::SiteOutOfRange { .. })));
        assert!(matches!(embed_at_site(&sz, 3, 2, 2), Err(Error::SiteOutOfRange { .. })));
        assert!(matches!(embed_at_site(&sz, 1, 2, 3), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn kronecker_assembly_matches_index_oracle() {
        for (dim, ops) in [
            (2usize, vec![LocalOperator::sigma_x(), LocalOperator::sigma_y(), LocalOperator::sigma_z()]),
            (3, (1..=8).map(LocalOperator::gell_mann).collect()),
        ] {
            for sites in 1..=3 {
                for (i, a) in ops.iter().enumerate() {
                    for s1 in 1..=sites {
                        let single = product_operator(&[(s1, a)], sites, dim).unwrap();
                        let n = single.dim();
                        for r in 0..n {
                            for col in 0..n {
                                assert_eq!(single.get(r, col), oracle_entry(&[(s1, a)], sites, dim, r, col));
                            }
                        }
                        for s2 in (s1 + 1)..=sites {
                            let b = &ops[(i + 1) % ops.len()];
                            let f = [(s1, a), (s2, b)];
                            let pair = product_operator(&f, sites, dim).unwrap();
                            for r in 0..n {
                                for col in 0..n {
                                    assert_eq!(pair.get(r, col), oracle_entry(&f, sites, dim, r, col));
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn sorted_eigenvalues(m: &OperatorMatrix) -> Vec<f64> {
        let mut e: Vec<f64> = m.to_dense().symmetric_eigen().eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn qubit_two_site_ising_spectrum() {
        let spec = HamiltonianSpec::qubit(2).with_fields(0.0, 0.0);
        let e = sorted_eigenvalues(&build_qubit_hamiltonian(&spec).unwrap());
        for (x, y) in e.iter().zip([-0.5, -0.5, 0.5, 0.5]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn qubit_two_site_transverse_spectrum() {
        let mut spec = HamiltonianSpec::qubit(2).with_fields(1.0, 0.0);
        spec.j = 0.0;
        let e = sorted_eigenvalues(&build_qubit_hamiltonian(&spec).unwrap());
        for (x, y) in e.iter().zip([-1.0, 0.0, 0.0, 1.0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn qubit_chaotic_is_traceless_with_order_one_range() {
        let h = build_qubit_hamiltonian(&HamiltonianSpec::qubit(8)).unwrap();
        assert!(h.trace().norm() < 1e-12);
        assert!(h.is_real());
        assert!(h.is_hermitian(1e-12));
        let e = sorted_eigenvalues(&h);
        let range = e[e.len() - 1] - e[0];
        assert!(range > 0.5 && range < 4.0, "range {range}");
    }

    #[test]
    fn normalization_toggle_scales_by_l() {
        let spec = HamiltonianSpec::qutrit(3, 1.0, 5);
        let mut raw = spec.clone();
        raw.normalize_by_l = false;
        let a = spec.build().unwrap();
        let b = raw.build().unwrap();
        let diff = a.scale(c(3.0)).sub(&b).max_abs();
        assert!(diff < 1e-12);
    }

    #[test]
    fn charge_spread_zero_coefficients() {
        let m = build_charge_spread(3, &[[0.0; 4]; 2]).unwrap();
        assert_eq!(m.nnz(), 0);
    }

    #[test]
    fn charge_spread_single_term_moves_charge_between_neighbours() {
        let m = build_charge_spread(2, &[[1.0, 0.0, 0.0, 0.0]]).unwrap();
        // oracle: explicit 9x9 Kronecker expansion of l4⊗l4 + l5⊗l5
        let l4 = LocalOperator::gell_mann(4).entries;
        let l5 = LocalOperator::gell_mann(5).entries;
        let dense = l4.kronecker(&l4) + l5.kronecker(&l5);
        assert_eq!(m.to_dense(), dense);
        let idx = |a: usize, b: usize| 3 * a + b;
        // |02> <-> |20> with amplitude 2
        assert_eq!(m.get(idx(2, 0), idx(0, 2)), c(2.0));
        assert_eq!(m.get(idx(0, 2), idx(2, 0)), c(2.0));
        // |01>, |00>, |22> are annihilated
        for col in [idx(0, 1), idx(0, 0), idx(2, 2)] {
            for r in 0..9 {
                assert_eq!(m.get(r, col), c(0.0));
            }
        }
        assert!(m.is_real());
    }

    #[test]
    fn charge_spread_conserves_total_charge() {
        let spec = HamiltonianSpec::qutrit(4, 1.0, 11);
        let coeffs = spec.spread_coefficients();
        let dq = build_charge_spread(4, &coeffs).unwrap();
        let (_, q) = build_charge_operators(4).unwrap();
        assert!(dq.commutator(&q).max_abs() < 1e-12);
        assert!(dq.is_real());
        assert!(dq.is_hermitian(1e-12));
    }

    #[test]
    fn charge_spread_shape_error() {
        assert!(matches!(
            build_charge_spread(4, &[[1.0; 4]; 2]),
            Err(Error::CoefficientShape { .. })
        ));
        assert!(matches!(
            build_charge_spread_from_rows(3, &[vec![1.0; 4], vec![1.0; 3]]),
            Err(Error::CoefficientShape { cols: 3, .. })
        ));
    }

    #[test]
    fn qutrit_commutes_with_charge() {
        let h = build_qutrit_hamiltonian(&HamiltonianSpec::qutrit(3, 1.0, 2)).unwrap();
        let (_, q) = build_charge_operators(3).unwrap();
        assert!(h.commutator(&q).max_abs() < 1e-12);
    }

    #[test]
    fn fully_charged_state_has_zero_energy() {
        let spec = HamiltonianSpec::qutrit(4, 1.0, 3);
        let h = build_qutrit_hamiltonian(&spec).unwrap();
        let top = spec.dim() - 1; // |2222>
        for r in 0..spec.dim() {
            assert_eq!(h.get(r, top), c(0.0));
        }
    }

    #[test]
    fn charge_operator_multiplicities() {
        let (local, total) = build_charge_operators(1).unwrap();
        assert_eq!(local[0].diagonal(), vec![c(0.0), c(0.0), c(1.0)]);
        let (_, q3) = build_charge_operators(3).unwrap();
        let mut counts = [0usize; 4];
        for v in q3.diagonal() {
            counts[v.re as usize] += 1;
        }
        assert_eq!(counts, [8, 12, 6, 1]);
        assert_eq!(total.nnz(), 1);
        for l in 2..=6 {
            let (_, q) = build_charge_operators(l).unwrap();
            assert_eq!(q.dim(), 3usize.pow(l as u32));
        }
    }

    #[test]
    fn coefficients_are_reproducible() {
        let spec = HamiltonianSpec::qutrit(6, 1.0, 42);
        let a = spec.spread_coefficients();
        let b = spec.spread_coefficients();
        assert_eq!(a.len(), 5);
        for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(spec.build().unwrap(), spec.build().unwrap());
    }

    #[test]
    fn spec_validation() {
        let mut s = HamiltonianSpec::qubit(1);
        assert!(s.validate().is_err());
        s.sites = 3;
        s.spread_width = -1.0;
        assert!(s.validate().is_err());
        let mut q = HamiltonianSpec::qubit(3);
        q.a = 1.0;
        assert!(q.validate().is_err());
    }

    #[test]
    fn product_expectation_matches_full_matrix() {
        let spec = HamiltonianSpec::qutrit(3, 1.0, 9);
        let terms = spec.terms().unwrap();
        let h = terms.to_matrix().unwrap();
        let locals: Vec<Vec<Complex64>> = vec![
            vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.48), Complex64::new(0.64, 0.0)],
            vec![Complex64::new(0.0, 1.0), c(0.0), c(0.0)],
            vec![c(0.6), c(0.0), Complex64::new(0.0, -0.8)],
        ];
        let mut full = vec![c(1.0)];
        for v in &locals {
            full = full.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
        }
        let direct = h.expectation(&full);
        let product = terms.product_expectation(&locals);
        assert!((direct - product).norm() < 1e-12);
    }

    #[test]
    fn sigma_y_field_gives_complex_hamiltonian() {
        let mut spec = HamiltonianSpec::qubit(3);
        spec.hy = 0.3;
        let h = spec.build().unwrap();
        assert!(!h.is_real());
        assert!(h.is_hermitian(1e-12));
    }
}
