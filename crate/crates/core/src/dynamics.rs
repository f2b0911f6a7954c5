//! Initial-state families and exact eigenbasis time evolution.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entanglement::{von_neumann_entropy, Bipartition};
use crate::ensembles::MicrocanonicalWindow;
use crate::error::{Error, Result};
use crate::lattice::{OperatorMatrix, OperatorSum};
use crate::spectral::Spectrum;

pub const DEFAULT_ENERGY_TOL: f64 = 0.002;
pub const DEFAULT_MAX_ATTEMPTS: u64 = 2_000_000;
/// Times evolved per dense product.
const TIME_CHUNK: usize = 128;

/// RNG for member `index` of an ensemble seeded by `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductKind {
    RandomQubit,
    RandomQutritF,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyTarget {
    pub energy: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    DEFAULT_ENERGY_TOL
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProductStateSpec {
    pub kind: ProductKind,
    pub sites: usize,
    /// One value for every site, or one per site.
    #[serde(default)]
    pub f: Vec<f64>,
    pub seed: u64,
    /// Position within an ensemble; selects the RNG stream.
    #[serde(default)]
    pub index: u64,
    #[serde(default)]
    pub target: Option<EnergyTarget>,
    #[serde(default = "default_attempts")]
    pub max_attempts: u64,
}

fn default_attempts() -> u64 {
    DEFAULT_MAX_ATTEMPTS
}

impl ProductStateSpec {
    pub fn qubit(sites: usize, seed: u64) -> Self {
        Self {
            kind: ProductKind::RandomQubit,
            sites,
            f: Vec::new(),
            seed,
            index: 0,
            target: None,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }

    pub fn qutrit(sites: usize, f: f64, seed: u64) -> Self {
        Self {
            kind: ProductKind::RandomQutritF,
            f: vec![f],
            ..Self::qubit(sites, seed)
        }
    }

    pub fn with_target(mut self, energy: f64, tol: f64) -> Self {
        self.target = Some(EnergyTarget { energy, tol });
        self
    }

    pub fn with_index(mut self, index: u64) -> Self {
        self.index = index;
        self
    }

    pub fn site_dim(&self) -> usize {
        match self.kind {
            ProductKind::RandomQubit => 2,
            ProductKind::RandomQutritF => 3,
        }
    }

    fn site_f(&self) -> Result<Vec<f64>> {
        let f = match self.f.len() {
            1 => vec![self.f[0]; self.sites],
            n if n == self.sites => self.f.clone(),
            n => return Err(Error::InvalidSpec(format!("{n} charge fractions for {} sites", self.sites))),
        };
        if f.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidSpec("charge fraction outside [0, 1]".into()));
        }
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 1 {
            return Err(Error::InvalidSpec("product state needs at least one site".into()));
        }
        if self.kind == ProductKind::RandomQutritF {
            self.site_f()?;
        }
        if let Some(t) = self.target {
            if !(t.tol > 0.0) || !t.energy.is_finite() {
                return Err(Error::InvalidSpec("energy target needs a finite value and positive tolerance".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Provenance {
    pub recipe: String,
    pub seed: u64,
    pub index: u64,
    /// Rejection-sampling draws used (1 without a target).
    pub attempts: u64,
}

#[derive(Clone, Debug)]
pub struct StateVector {
    pub amplitudes: Vec<Complex64>,
    /// Per-site factors, present for product states.
    pub factors: Option<Vec<Vec<Complex64>>>,
    pub provenance: Provenance,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>, recipe: impl Into<String>) -> Result<Self> {
        let norm = norm(&amplitudes);
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Unnormalized { norm });
        }
        Ok(Self {
            amplitudes,
            factors: None,
            provenance: Provenance {
                recipe: recipe.into(),
                ..Default::default()
            },
        })
    }

    /// Tensor product with site 1 as the most significant factor.
    pub fn product(factors: Vec<Vec<Complex64>>, recipe: impl Into<String>) -> Result<Self> {
        let mut amps = vec![Complex64::new(1.0, 0.0)];
        for f in &factors {
            let mut next = Vec::with_capacity(amps.len() * f.len());
            for a in &amps {
                for b in f {
                    next.push(a * b);
                }
            }
            amps = next;
        }
        let mut s = Self::new(amps, recipe)?;
        s.factors = Some(factors);
        Ok(s)
    }

    /// Computational basis state with the given digits (site 1 first).
    pub fn basis(digits: &[usize], d: usize) -> Result<Self> {
        let factors = digits
            .iter()
            .map(|&k| {
                if k >= d {
                    return Err(Error::InvalidSpec(format!("level {k} for site dimension {d}")));
                }
                let mut v = vec![Complex64::new(0.0, 0.0); d];
                v[k] = Complex64::new(1.0, 0.0);
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::product(factors, "basis")
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn qubit_factor(rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let theta = rng.random_range(0.0..=PI);
    let phi = rng.random_range(0.0..2.0 * PI);
    vec![
        Complex64::new((theta / 2.0).cos(), 0.0),
        Complex64::from_polar((theta / 2.0).sin(), phi),
    ]
}

fn qutrit_factor(rng: &mut ChaCha8Rng, f: f64) -> Vec<Complex64> {
    let theta = rng.random_range(0.0..=FRAC_PI_2);
    let phi1 = rng.random_range(0.0..2.0 * PI);
    let phi2 = rng.random_range(0.0..2.0 * PI);
    let r = (1.0 - f).sqrt();
    vec![
        Complex64::new(r * theta.cos(), 0.0),
        Complex64::from_polar(r * theta.sin(), phi1),
        Complex64::from_polar(f.sqrt(), phi2),
    ]
}

/// Random unentangled state. With a target energy, draws are repeated until
/// the product-state energy (evaluated from the site factors against `h`)
/// lies within the tolerance.
pub fn random_product_state(spec: &ProductStateSpec, h: Option<&OperatorSum>) -> Result<StateVector> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, spec.index);
    let f = if spec.kind == ProductKind::RandomQutritF {
        spec.site_f()?
    } else {
        Vec::new()
    };
    let draw = |rng: &mut ChaCha8Rng| -> Vec<Vec<Complex64>> {
        (0..spec.sites)
            .map(|r| match spec.kind {
                ProductKind::RandomQubit => qubit_factor(rng),
                ProductKind::RandomQutritF => qutrit_factor(rng, f[r]),
            })
            .collect()
    };
    let mut attempts = 0u64;
    let factors = match spec.target {
        None => {
            attempts = 1;
            draw(&mut rng)
        }
        Some(t) => {
            let h = h.ok_or_else(|| Error::InvalidSpec("energy target requires a Hamiltonian".into()))?;
            if h.sites != spec.sites || h.site_dim != spec.site_dim() {
                return Err(Error::DimensionMismatch {
                    expected: h.site_dim.pow(h.sites as u32),
                    actual: spec.site_dim().pow(spec.sites as u32),
                });
            }
            loop {
                if attempts >= spec.max_attempts {
                    return Err(Error::RejectionCap { attempts, accepted: 0 });
                }
                attempts += 1;
                let cand = draw(&mut rng);
                if (h.product_expectation(&cand).re - t.energy).abs() <= t.tol {
                    break cand;
                }
            }
        }
    };
    let recipe = match spec.kind {
        ProductKind::RandomQubit => "random_qubit_product".to_string(),
        ProductKind::RandomQutritF => format!("random_qutrit_product(f={:?})", spec.f),
    };
    let mut s = StateVector::product(factors, recipe)?;
    s.provenance.seed = spec.seed;
    s.provenance.index = spec.index;
    s.provenance.attempts = attempts;
    Ok(s)
}

/// `count` states with indices `0..count`, generated in parallel; the result
/// does not depend on the worker count.
pub fn product_ensemble(spec: &ProductStateSpec, h: Option<&OperatorSum>, count: usize) -> Result<Vec<StateVector>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| random_product_state(&spec.clone().with_index(i), h))
        .collect()
}

/// Independent complex Gaussian amplitudes on the window members.
pub fn random_microcanonical_state(
    spectrum: &Spectrum,
    window: &MicrocanonicalWindow,
    seed: u64,
    index: u64,
) -> Result<StateVector> {
    if window.is_empty() {
        return Err(Error::EmptyWindow {
            e_min: window.e_min,
            e_max: window.e_max,
        });
    }
    let mut rng = stream_rng(seed, index);
    let mut c = vec![Complex64::new(0.0, 0.0); spectrum.full_dim()];
    for &i in &window.member_indices {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c[i] = Complex64::new(re, im);
    }
    let n = norm(&c);
    for z in &mut c {
        *z /= n;
    }
    let amps = spectrum.reconstruct(&c);
    let n = norm(&amps);
    let mut s = StateVector::new(amps.iter().map(|z| z / n).collect(), "random_microcanonical")?;
    s.provenance.seed = seed;
    s.provenance.index = index;
    s.provenance.attempts = 1;
    Ok(s)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Single,
    Mean,
    Quantile(f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleMeta {
    pub count: usize,
    pub seed: u64,
    /// Inclusive range of stream indices.
    pub index_range: (u64, u64),
    pub aggregation: Aggregation,
}

#[derive(Clone, Debug, Serialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: EnsembleMeta,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, meta: EnsembleMeta) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                actual: values.len(),
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSpec("time grid must be strictly increasing".into()));
        }
        Ok(Self { times, values, meta })
    }

    fn single(times: &[f64], values: Vec<f64>, state: &StateVector) -> Result<Self> {
        Self::new(
            times.to_vec(),
            values,
            EnsembleMeta {
                count: 1,
                seed: state.provenance.seed,
                index_range: (state.provenance.index, state.provenance.index),
                aggregation: Aggregation::Single,
            },
        )
    }

    /// Mean and population standard deviation over the last `fraction` of
    /// the samples.
    pub fn late_stats(&self, fraction: f64) -> (f64, f64) {
        late_stats(&self.values, fraction)
    }
}

pub fn late_stats(values: &[f64], fraction: f64) -> (f64, f64) {
    let n = values.len();
    let k = ((n as f64 * fraction).round() as usize).clamp(1, n.max(1));
    let tail = &values[n - k..];
    let mean = tail.iter().sum::<f64>() / k as f64;
    let var = tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k as f64;
    (mean, var.sqrt())
}

/// `t0, t0 + step, ...` up to and including `t1` (within round-off).
pub fn uniform_grid(t0: f64, t1: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(t1 >= t0) {
        return Err(Error::InvalidSpec(format!("bad time grid [{t0}, {t1}] step {step}")));
    }
    let n = ((t1 - t0) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| t0 + k as f64 * step).collect())
}

fn check_dim(spectrum: &Spectrum, state: &StateVector) -> Result<()> {
    if state.dim() != spectrum.full_dim() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.full_dim(),
            actual: state.dim(),
        });
    }
    Ok(())
}

/// Applies `f` to `psi(t)` for every `t` in `times`, in order.
pub fn map_trajectory<F>(spectrum: &Spectrum, state: &StateVector, times: &[f64], mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(&[Complex64]) -> Result<f64>,
{
    check_dim(spectrum, state)?;
    let coeffs = spectrum.project(&state.amplitudes)?;
    let mut out = Vec::with_capacity(times.len());
    for chunk in times.chunks(TIME_CHUNK) {
        for psi in spectrum.evolve_states(&coeffs, chunk) {
            out.push(f(&psi)?);
        }
    }
    Ok(out)
}

/// `<psi(t)|O|psi(t)>` on the grid.
pub fn evolve_expectation(state: &StateVector, spectrum: &Spectrum, op: &OperatorMatrix, times: &[f64]) -> Result<TimeSeries> {
    if op.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            actual: op.dim(),
        });
    }
    let values = map_trajectory(spectrum, state, times, |psi| Ok(op.expectation(psi).re))?;
    TimeSeries::single(times, values, state)
}

/// Entanglement entropy (bits) of `sites` along the trajectory.
pub fn evolve_entropy(state: &StateVector, spectrum: &Spectrum, sites: &[usize], times: &[f64]) -> Result<TimeSeries> {
    let part = Bipartition::new(sites, spectrum.sites, spectrum.site_dim)?;
    let values = map_trajectory(spectrum, state, times, |psi| von_neumann_entropy(&part.reduce(psi)?))?;
    TimeSeries::single(times, values, state)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TimeAverage {
    pub value: f64,
    /// Set when two eigenvalues coincide to 1e-10 of the spectral range, in
    /// which case the infinite-time average may pick up off-diagonal terms.
    pub degenerate: bool,
}

/// Infinite-time average `sum |c_i|^2 O_ii`.
pub fn time_average(state: &StateVector, spectrum: &Spectrum, op: &OperatorMatrix) -> Result<TimeAverage> {
    check_dim(spectrum, state)?;
    let w: Vec<f64> = spectrum.project(&state.amplitudes)?.iter().map(|c| c.norm_sqr()).collect();
    let diag = spectrum.diagonal_elements(op)?;
    Ok(TimeAverage {
        value: w.iter().zip(&diag).map(|(a, b)| a * b).sum(),
        degenerate: spectrum.min_relative_gap() < 1e-10,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FluctuationBound {
    /// `sum_{i != j} |c_i|^2 |c_j|^2 |O_ij|^2`.
    pub variance: f64,
    /// `max_{i != j} |O_ij|^2`.
    pub bound: f64,
}

pub fn fluctuation_bound(state: &StateVector, spectrum: &Spectrum, op: &OperatorMatrix) -> Result<FluctuationBound> {
    check_dim(spectrum, state)?;
    let w: Vec<f64> = spectrum.project(&state.amplitudes)?.iter().map(|c| c.norm_sqr()).collect();
    let m = spectrum.dense_eigenbasis()?.sandwich(op);
    fluctuation_from_elements(&w, &m)
}

pub fn fluctuation_from_elements(weights: &[f64], elements: &DMatrix<Complex64>) -> Result<FluctuationBound> {
    let n = weights.len();
    if elements.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: elements.nrows(),
        });
    }
    let mut variance = 0.0;
    let mut bound: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i == j {
                continue;
            }
            let a = elements[(i, j)].norm_sqr();
            variance += weights[i] * weights[j] * a;
            bound = bound.max(a);
        }
    }
    debug_assert!(variance <= bound * (1.0 + 1e-12));
    Ok(FluctuationBound { variance, bound })
}

/// `delta^(n) = sum_i |c_i|^2 (E_i - E_psi)^n` for `n = 2..=n_max`, with
/// `E_psi` the state's mean energy.
pub fn central_moments(state: &StateVector, spectrum: &Spectrum, n_max: u32) -> Result<Vec<f64>> {
    check_dim(spectrum, state)?;
    let w: Vec<f64> = spectrum.project(&state.amplitudes)?.iter().map(|c| c.norm_sqr()).collect();
    Ok(moments_from_weights(&w, &spectrum.energies(), n_max))
}

pub fn moments_from_weights(weights: &[f64], energies: &[f64], n_max: u32) -> Vec<f64> {
    let mean: f64 = weights.iter().zip(energies).map(|(w, e)| w * e).sum();
    (2..=n_max)
        .map(|n| {
            weights
                .iter()
                .zip(energies)
                .map(|(w, e)| w * (e - mean).powi(n as i32))
                .sum()
        })
        .collect()
}

/// `<q^(r)>(t)` for every site `r`, one series per site.
pub fn charge_profile(state: &StateVector, spectrum: &Spectrum, times: &[f64]) -> Result<Vec<TimeSeries>> {
    if spectrum.site_dim != 3 {
        return Err(Error::NotQutrit);
    }
    let l = spectrum.sites;
    // occupation pattern of |2> for each basis index
    let twos: Vec<Vec<usize>> = (0..spectrum.full_dim())
        .map(|idx| {
            crate::lattice::digits(idx, l, 3)
                .iter()
                .enumerate()
                .filter(|(_, &d)| d == 2)
                .map(|(r, _)| r)
                .collect()
        })
        .collect();
    let mut per_site = vec![Vec::with_capacity(times.len()); l];
    map_trajectory(spectrum, state, times, |psi| {
        let mut q = vec![0.0; l];
        for (amp, sites) in psi.iter().zip(&twos) {
            let p = amp.norm_sqr();
            for &r in sites {
                q[r] += p;
            }
        }
        for (r, v) in q.into_iter().enumerate() {
            per_site[r].push(v);
        }
        Ok(0.0)
    })?;
    per_site
        .into_iter()
        .map(|v| TimeSeries::single(times, v, state))
        .collect()
}

/// Linear-interpolation quantile of sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub const DECILES: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Per-time mean and quantiles across an ensemble of equal-length series.
#[derive(Clone, Debug, Serialize)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub quantile_levels: Vec<f64>,
    /// `quantiles[k][t]` is level `k` at time `t`.
    pub quantiles: Vec<Vec<f64>>,
    pub meta: EnsembleMeta,
}

pub fn summarize(series: &[TimeSeries], levels: &[f64]) -> Result<EnsembleSummary> {
    let first = series.first().ok_or_else(|| Error::InvalidSpec("empty ensemble".into()))?;
    let nt = first.times.len();
    if series.iter().any(|s| s.values.len() != nt) {
        return Err(Error::InvalidSpec("ensemble series have different lengths".into()));
    }
    let mut mean = Vec::with_capacity(nt);
    let mut quantiles = vec![Vec::with_capacity(nt); levels.len()];
    let mut column = Vec::with_capacity(series.len());
    for t in 0..nt {
        column.clear();
        column.extend(series.iter().map(|s| s.values[t]));
        mean.push(column.iter().sum::<f64>() / column.len() as f64);
        column.sort_by(f64::total_cmp);
        for (k, &q) in levels.iter().enumerate() {
            quantiles[k].push(quantile_sorted(&column, q));
        }
    }
    let lo = series.iter().map(|s| s.meta.index_range.0).min().unwrap();
    let hi = series.iter().map(|s| s.meta.index_range.1).max().unwrap();
    Ok(EnsembleSummary {
        times: first.times.clone(),
        mean,
        quantile_levels: levels.to_vec(),
        quantiles,
        meta: EnsembleMeta {
            count: series.len(),
            seed: first.meta.seed,
            index_range: (lo, hi),
            aggregation: Aggregation::Mean,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::diagonal_ensemble;
    use crate::lattice::{build_charge_operators, embed_at_site, HamiltonianSpec, LocalOperator};
    use crate::sectors::Symmetry;

    fn qubit(l: usize) -> (HamiltonianSpec, Spectrum) {
        let spec = HamiltonianSpec::qubit(l);
        let s = Spectrum::build(&spec, &[Symmetry::Parity]).unwrap();
        (spec, s)
    }

    /// Direct evolution with a dense matrix exponential computed from an
    /// independent (unsectored, complex) eigendecomposition.
    fn direct_expectation(h: &OperatorMatrix, psi: &[Complex64], op: &OperatorMatrix, t: f64) -> f64 {
        let hd = h.to_dense();
        let eig = hd.clone().symmetric_eigen();
        let n = psi.len();
        let u = DMatrix::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| {
                    eig.eigenvectors[(i, k)]
                        * Complex64::from_polar(1.0, -eig.eigenvalues[k] * t)
                        * eig.eigenvectors[(j, k)].conj()
                })
                .sum::<Complex64>()
        });
        let v = &u * nalgebra::DVector::from_column_slice(psi);
        op.expectation(v.as_slice()).re
    }

    #[test]
    fn qutrit_f_limits() {
        let s = random_product_state(&ProductStateSpec::qutrit(4, 0.0, 3), None).unwrap();
        for (idx, a) in s.amplitudes.iter().enumerate() {
            if crate::lattice::digits(idx, 4, 3).contains(&2) {
                assert_eq!(a.norm(), 0.0);
            }
        }
        let s = random_product_state(&ProductStateSpec::qutrit(4, 1.0, 3), None).unwrap();
        assert!((s.amplitudes[80].norm() - 1.0).abs() < 1e-15);
        let h = HamiltonianSpec::qutrit(4, 1.0, 0).build().unwrap();
        assert!(h.expectation(&s.amplitudes).norm() < 1e-14);
    }

    #[test]
    fn qutrit_local_charge_equals_f() {
        let s = random_product_state(&ProductStateSpec::qutrit(5, 0.3, 8), None).unwrap();
        let (local, _) = build_charge_operators(5).unwrap();
        for q in &local {
            assert!((q.expectation(&s.amplitudes).re - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn binomial_charge_distribution() {
        let l = 5;
        let f: f64 = 0.35;
        let s = random_product_state(&ProductStateSpec::qutrit(l, f, 21), None).unwrap();
        let mut p = vec![0.0; l + 1];
        for (idx, a) in s.amplitudes.iter().enumerate() {
            p[crate::lattice::charge_of_index(idx, l)] += a.norm_sqr();
        }
        let binom = |n: usize, k: usize| (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
        for q in 0..=l {
            let want = binom(l, q) * f.powi(q as i32) * (1.0 - f).powi((l - q) as i32);
            assert!((p[q] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn rejection_hits_target_and_reports_cap() {
        let spec = HamiltonianSpec::qubit(6);
        let terms = spec.terms().unwrap();
        let h = spec.build().unwrap();
        let ps = ProductStateSpec::qubit(6, 4).with_target(-0.4, 0.002);
        let s = random_product_state(&ps, Some(&terms)).unwrap();
        assert!((h.expectation(&s.amplitudes).re + 0.4).abs() <= 0.002 + 1e-12);
        assert!(s.provenance.attempts >= 1);

        let mut hard = ProductStateSpec::qubit(6, 4).with_target(-5.0, 1e-3);
        hard.max_attempts = 100;
        assert!(matches!(
            random_product_state(&hard, Some(&terms)),
            Err(Error::RejectionCap { attempts: 100, .. })
        ));
    }

    #[test]
    fn ensembles_are_reproducible_and_distinct() {
        let ps = ProductStateSpec::qubit(4, 99);
        let a = product_ensemble(&ps, None, 5).unwrap();
        let b = product_ensemble(&ps, None, 5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.amplitudes, y.amplitudes);
        }
        assert_ne!(a[0].amplitudes, a[1].amplitudes);
        let solo = random_product_state(&ps.clone().with_index(3), None).unwrap();
        assert_eq!(solo.amplitudes, a[3].amplitudes);
    }

    #[test]
    fn evolution_matches_direct_exponential() {
        let (spec, s) = qubit(5);
        let h = spec.build().unwrap();
        let psi = random_product_state(&ProductStateSpec::qubit(5, 1), None).unwrap();
        let op = embed_at_site(&LocalOperator::sigma_x(), 2, 5, 2).unwrap();
        let times = [0.0, 0.7, 3.1, 12.5];
        let ts = evolve_expectation(&psi, &s, &op, &times).unwrap();
        for (k, &t) in times.iter().enumerate() {
            assert!((ts.values[k] - direct_expectation(&h, &psi.amplitudes, &op, t)).abs() < 1e-9);
        }
    }

    #[test]
    fn conservation_along_trajectory() {
        let (spec, s) = qubit(6);
        let h = spec.build().unwrap();
        let psi = random_product_state(&ProductStateSpec::qubit(6, 2), None).unwrap();
        let times = uniform_grid(0.0, 50.0, 0.5).unwrap();
        let e = evolve_expectation(&psi, &s, &h, &times).unwrap();
        let norms = map_trajectory(&s, &psi, &times, |v| Ok(norm(v))).unwrap();
        for (x, n) in e.values.iter().zip(&norms) {
            assert!((x - e.values[0]).abs() < 1e-9);
            assert!((n - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn eigenstate_series_is_constant() {
        let (_, s) = qubit(5);
        let v = StateVector::new(s.eigenvector_full(4), "eigenstate").unwrap();
        let op = embed_at_site(&LocalOperator::sigma_x(), 1, 5, 2).unwrap();
        let ts = evolve_expectation(&v, &s, &op, &[0.0, 1.0, 10.0]).unwrap();
        assert!(ts.values.iter().all(|x| (x - ts.values[0]).abs() < 1e-12));
        let avg = time_average(&v, &s, &op).unwrap();
        assert!((avg.value - ts.values[0]).abs() < 1e-12);
        let fb = fluctuation_bound(&v, &s, &op).unwrap();
        assert!(fb.variance < 1e-20);
    }

    #[test]
    fn product_entropy_starts_at_zero() {
        let (_, s) = qubit(6);
        let psi = random_product_state(&ProductStateSpec::qubit(6, 7), None).unwrap();
        let ts = evolve_entropy(&psi, &s, &[1], &[0.0, 5.0]).unwrap();
        assert!(ts.values[0] < 1e-10);
        assert!(ts.values[1] > 1e-3);
    }

    #[test]
    fn two_level_moments() {
        let (_, s) = qubit(4);
        let order = s.sorted_order();
        let (i, j) = (order[3], order[9]);
        let mut c = vec![Complex64::new(0.0, 0.0); 16];
        c[i] = Complex64::new(0.5f64.sqrt(), 0.0);
        c[j] = Complex64::new(0.0, 0.5f64.sqrt());
        let v = StateVector::new(s.reconstruct(&c), "pair").unwrap();
        let e = s.energies();
        let delta = 0.5 * (e[j] - e[i]);
        let m = central_moments(&v, &s, 4).unwrap();
        assert!((m[0] - delta * delta).abs() < 1e-12);
        assert!(m[1].abs() < 1e-12);
        assert!((m[2] - delta.powi(4)).abs() < 1e-12);
        let eig = StateVector::new(s.eigenvector_full(2), "eig").unwrap();
        assert!(central_moments(&eig, &s, 3).unwrap().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn microcanonical_state_stays_in_window() {
        let (_, s) = qubit(6);
        let e = s.energies();
        let w = MicrocanonicalWindow::centered(&e, -0.1, 0.05).unwrap();
        let v = random_microcanonical_state(&s, &w, 3, 0).unwrap();
        let weights = diagonal_ensemble(&v.amplitudes, &s).unwrap();
        let mean: f64 = weights.iter().zip(&e).map(|(a, b)| a * b).sum();
        assert!(mean >= w.e_min && mean <= w.e_max);
        for (i, wt) in weights.iter().enumerate() {
            if !w.member_indices.contains(&i) {
                assert!(*wt < 1e-20);
            }
        }
        let single = MicrocanonicalWindow::centered(&e, e[5], 1e-12).unwrap();
        let v = random_microcanonical_state(&s, &single, 3, 1).unwrap();
        let overlap: Complex64 = s
            .eigenvector_full(5)
            .iter()
            .zip(&v.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum();
        assert!((overlap.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn charge_profile_total_is_conserved() {
        let spec = HamiltonianSpec::qutrit(4, 1.0, 5);
        let s = Spectrum::build(&spec, &[Symmetry::Charge]).unwrap();
        let v = StateVector::basis(&[2, 0, 0, 0], 3).unwrap();
        let times = uniform_grid(0.0, 20.0, 1.0).unwrap();
        let prof = charge_profile(&v, &s, &times).unwrap();
        for t in 0..times.len() {
            let total: f64 = prof.iter().map(|p| p.values[t]).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
        assert!(prof[0].values.iter().any(|x| (x - 1.0).abs() > 1e-3));

        let spec0 = HamiltonianSpec::qutrit(4, 0.0, 5);
        let s0 = Spectrum::build(&spec0, &[Symmetry::Charge]).unwrap();
        let v = random_product_state(&ProductStateSpec::qutrit(4, 0.4, 1), None).unwrap();
        for p in charge_profile(&v, &s0, &times).unwrap() {
            assert!(p.values.iter().all(|x| (x - p.values[0]).abs() < 1e-9));
        }
        let (_, sq) = qubit(4);
        assert!(matches!(charge_profile(&StateVector::basis(&[0; 4], 2).unwrap(), &sq, &times), Err(Error::NotQutrit)));
    }

    #[test]
    fn quantiles_and_summary() {
        let data = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&data, 0.5), 2.5);
        assert_eq!(quantile_sorted(&data, 0.0), 1.0);
        assert!((quantile_sorted(&data, 0.1) - 1.3).abs() < 1e-15);
        let meta = |i| EnsembleMeta {
            count: 1,
            seed: 0,
            index_range: (i, i),
            aggregation: Aggregation::Single,
        };
        let series: Vec<TimeSeries> = (0..4)
            .map(|i| TimeSeries::new(vec![0.0, 1.0], vec![i as f64, 2.0 * i as f64], meta(i)).unwrap())
            .collect();
        let sum = summarize(&series, &DECILES).unwrap();
        assert_eq!(sum.mean, vec![1.5, 3.0]);
        assert_eq!(sum.meta.index_range, (0, 3));
        assert!(TimeSeries::new(vec![1.0, 1.0], vec![0.0, 0.0], meta(0)).is_err());
    }

    #[test]
    fn grid_includes_endpoint() {
        let g = uniform_grid(0.0, 1.0, 0.25).unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(uniform_grid(0.0, 1.0, 0.0).is_err());
    }
}
