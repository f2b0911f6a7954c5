//! Microcanonical, Gibbs, generalized Gibbs and diagonal ensembles.
//!
//! The generalized ensemble is parametrized by (beta, gamma = beta * mu):
//! weights are proportional to exp(-beta E_i + gamma q_i).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::entanglement::{mixed_reduce, von_neumann_entropy, EigenstateReductions};
use crate::error::{Error, Result};
use crate::lattice::OperatorMatrix;
use crate::spectral::Spectrum;

pub const DEFAULT_HALF_WIDTH: f64 = 0.05;

#[derive(Clone, Debug, Serialize)]
pub struct MicrocanonicalWindow {
    pub e_min: f64,
    pub e_max: f64,
    pub member_indices: Vec<usize>,
    pub mean_energy: f64,
}

impl MicrocanonicalWindow {
    /// Members are all indices with `e_min <= E_i <= e_max` accepted by `keep`.
    pub fn select(energies: &[f64], e_min: f64, e_max: f64, keep: impl Fn(usize) -> bool) -> Result<Self> {
        let member_indices: Vec<usize> = (0..energies.len())
            .filter(|&i| energies[i] >= e_min && energies[i] <= e_max && keep(i))
            .collect();
        if member_indices.is_empty() {
            return Err(Error::EmptyWindow { e_min, e_max });
        }
        let mean_energy = member_indices.iter().map(|&i| energies[i]).sum::<f64>() / member_indices.len() as f64;
        Ok(Self {
            e_min,
            e_max,
            member_indices,
            mean_energy,
        })
    }

    pub fn new(energies: &[f64], e_min: f64, e_max: f64) -> Result<Self> {
        Self::select(energies, e_min, e_max, |_| true)
    }

    pub fn centered(energies: &[f64], center: f64, half_width: f64) -> Result<Self> {
        Self::new(energies, center - half_width, center + half_width)
    }

    pub fn len(&self) -> usize {
        self.member_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_indices.is_empty()
    }

    /// Uniform average of per-eigenstate values over the members.
    pub fn average(&self, values: &[f64]) -> f64 {
        self.member_indices.iter().map(|&i| values[i]).sum::<f64>() / self.len() as f64
    }

    pub fn weights(&self, dim: usize) -> Vec<f64> {
        let mut w = vec![0.0; dim];
        let p = 1.0 / self.len() as f64;
        for &i in &self.member_indices {
            w[i] = p;
        }
        w
    }
}

pub fn microcanonical_expectation(spectrum: &Spectrum, window: &MicrocanonicalWindow, op: &OperatorMatrix) -> Result<f64> {
    Ok(window.average(&spectrum.diagonal_elements(op)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsParams {
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl GibbsParams {
    pub fn beta(beta: f64) -> Self {
        Self { beta, gamma: None }
    }

    pub fn beta_gamma(beta: f64, gamma: f64) -> Self {
        Self { beta, gamma: Some(gamma) }
    }

    pub fn from_beta_mu(beta: f64, mu: f64) -> Self {
        Self::beta_gamma(beta, beta * mu)
    }

    /// Chemical potential, defined only away from beta = 0.
    pub fn mu(&self) -> Option<f64> {
        match self.gamma {
            Some(g) if self.beta != 0.0 => Some(g / self.beta),
            _ => None,
        }
    }
}

/// Normalized weights `exp(-beta E_i + gamma q_i)`, computed with the
/// max-log-weight shift.
pub fn gibbs_weights(energies: &[f64], charges: Option<&[f64]>, params: GibbsParams) -> Result<Vec<f64>> {
    let logw: Vec<f64> = match (params.gamma, charges) {
        (Some(g), Some(q)) => {
            if q.len() != energies.len() {
                return Err(Error::DimensionMismatch {
                    expected: energies.len(),
                    actual: q.len(),
                });
            }
            energies.iter().zip(q).map(|(e, q)| -params.beta * e + g * q).collect()
        }
        (Some(_), None) => {
            return Err(Error::InvalidSpec("a charge weight needs per-eigenstate charges".into()));
        }
        (None, _) => energies.iter().map(|e| -params.beta * e).collect(),
    };
    Ok(normalize_log_weights(&logw))
}

fn normalize_log_weights(logw: &[f64]) -> Vec<f64> {
    let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

fn log_sum_exp(logw: &[f64]) -> f64 {
    let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + logw.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

/// Gibbs weights over the flat eigenstates of `spectrum`.
pub fn gibbs_state(spectrum: &Spectrum, params: GibbsParams) -> Result<Vec<f64>> {
    let charges = if params.gamma.is_some() { spectrum.charges() } else { None };
    gibbs_weights(&spectrum.energies(), charges.as_deref(), params)
}

pub fn weighted_mean(weights: &[f64], values: &[f64]) -> f64 {
    weights.iter().zip(values).map(|(w, v)| w * v).sum()
}

fn gibbs_energy(energies: &[f64], beta: f64) -> f64 {
    let w = gibbs_weights(energies, None, GibbsParams::beta(beta)).unwrap();
    weighted_mean(&w, energies)
}

/// Inverse temperature with `<H>_beta = target`, by bisection on
/// `[-cap, cap]`, `cap = 1e4 / range`.
pub fn solve_beta(energies: &[f64], target: f64) -> Result<f64> {
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let e_max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(target > e_min && target < e_max) {
        return Err(Error::TargetOutOfRange { target, e_min, e_max });
    }
    let cap = 1e4 / (e_max - e_min);
    let (mut lo, mut hi) = (-cap, cap);
    // <H> decreases in beta
    if gibbs_energy(energies, hi) > target || gibbs_energy(energies, lo) < target {
        return Err(Error::TargetOutOfRange { target, e_min, e_max });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if gibbs_energy(energies, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (elo, ehi) = (gibbs_energy(energies, lo) - target, gibbs_energy(energies, hi) - target);
    let beta = if elo.abs() <= ehi.abs() { lo } else { hi };
    let resid = elo.abs().min(ehi.abs());
    if resid > 1e-10 {
        return Err(Error::NoConvergence(format!("beta bisection residual {resid:.3e}")));
    }
    Ok(beta)
}

#[derive(Clone, Copy, Debug)]
struct Moments {
    log_z: f64,
    e: f64,
    q: f64,
    var_e: f64,
    var_q: f64,
    cov: f64,
}

fn moments(energies: &[f64], charges: &[f64], beta: f64, gamma: f64) -> Moments {
    let logw: Vec<f64> = energies.iter().zip(charges).map(|(e, q)| -beta * e + gamma * q).collect();
    let log_z = log_sum_exp(&logw);
    let w = normalize_log_weights(&logw);
    let e = weighted_mean(&w, energies);
    let q = weighted_mean(&w, charges);
    let (mut var_e, mut var_q, mut cov) = (0.0, 0.0, 0.0);
    for ((wi, ei), qi) in w.iter().zip(energies).zip(charges) {
        var_e += wi * (ei - e) * (ei - e);
        var_q += wi * (qi - q) * (qi - q);
        cov += wi * (ei - e) * (qi - q);
    }
    Moments {
        log_z,
        e,
        q,
        var_e,
        var_q,
        cov,
    }
}

/// (beta, gamma) with `<H> = target_e` and `<Q> = target_q`.
///
/// Damped Newton on the convex dual `F = log Z + beta E* - gamma Q*`, whose
/// gradient is `(E* - <H>, <Q> - Q*)` and whose Hessian is the covariance of
/// `(-H, Q)`.
pub fn solve_beta_gamma(energies: &[f64], charges: &[f64], target_e: f64, target_q: f64) -> Result<GibbsParams> {
    if charges.len() != energies.len() {
        return Err(Error::DimensionMismatch {
            expected: energies.len(),
            actual: charges.len(),
        });
    }
    let q_min = charges.iter().copied().fold(f64::INFINITY, f64::min);
    let q_max = charges.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let e_max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let unattainable = |reason: &str| Error::TargetNotAttainable {
        energy: target_e,
        charge: target_q,
        reason: reason.to_string(),
    };
    if !(target_q > q_min && target_q < q_max) {
        return Err(unattainable("charge outside the open charge range"));
    }
    if !(target_e > e_min && target_e < e_max) {
        return Err(unattainable("energy outside the open spectral interval"));
    }
    let cap = 1e4 / (e_max - e_min).max(q_max - q_min);
    let dual = |b: f64, g: f64, m: &Moments| m.log_z + b * target_e - g * target_q;

    let (mut beta, mut gamma) = (0.0, 0.0);
    let mut m = moments(energies, charges, beta, gamma);
    for _ in 0..500 {
        let grad = [target_e - m.e, m.q - target_q];
        if grad[0].hypot(grad[1]) < 1e-8 {
            return Ok(GibbsParams::beta_gamma(beta, gamma));
        }
        // Hessian of F in (beta, gamma): [[Var H, -Cov], [-Cov, Var Q]]
        let (h11, h12, h22) = (m.var_e, -m.cov, m.var_q);
        let det = h11 * h22 - h12 * h12;
        let scale = (h11 * h22).max(f64::MIN_POSITIVE);
        if det <= 1e-13 * scale || !det.is_finite() {
            return Err(Error::SingularJacobian { determinant: det });
        }
        let step = [-(h22 * grad[0] - h12 * grad[1]) / det, -(-h12 * grad[0] + h11 * grad[1]) / det];
        let f0 = dual(beta, gamma, &m);
        let slope = grad[0] * step[0] + grad[1] * step[1];
        // near the optimum the decrease of F drops below its round-off;
        // there the gradient norm is the usable merit function
        let resolvable = slope.abs() > 1e-12 * f0.abs().max(1.0);
        let gnorm = grad[0].hypot(grad[1]);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let (b, g) = (beta + t * step[0], gamma + t * step[1]);
            let mt = moments(energies, charges, b, g);
            let ok = if resolvable {
                dual(b, g, &mt) <= f0 + 1e-4 * t * slope
            } else {
                (target_e - mt.e).hypot(mt.q - target_q) < gnorm
            };
            if ok {
                accepted = Some((b, g, mt));
                break;
            }
            t *= 0.5;
        }
        let Some((b, g, mt)) = accepted else {
            // line search stalls only at round-off; accept if already close
            if grad[0].hypot(grad[1]) < 1e-7 {
                return Ok(GibbsParams::beta_gamma(beta, gamma));
            }
            return Err(Error::NoConvergence("line search failed".into()));
        };
        beta = b;
        gamma = g;
        m = mt;
        if beta.abs() > cap || gamma.abs() > cap {
            return Err(unattainable("parameters diverge; target lies on or beyond the attainable boundary"));
        }
    }
    Err(Error::NoConvergence("generalized Gibbs Newton iteration".into()))
}

/// Weights `|<E_i|psi>|^2` in flat order.
pub fn diagonal_ensemble(psi: &[Complex64], spectrum: &Spectrum) -> Result<Vec<f64>> {
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::Unnormalized { norm });
    }
    Ok(spectrum.project(psi)?.iter().map(|c| c.norm_sqr()).collect())
}

/// Entropy (bits) of one site in the mixture `sum w_i |E_i><E_i|`.
pub fn thermal_entropy_of_site(weights: &[f64], spectrum: &Spectrum, site: usize) -> Result<f64> {
    von_neumann_entropy(&mixed_reduce(weights, spectrum, &[site])?)
}

/// Thermal densities on a rectangular (beta, mu) grid, with bilinear
/// interpolation in between.
#[derive(Clone, Debug, Serialize)]
pub struct ThermalSurface {
    pub betas: Vec<f64>,
    pub mus: Vec<f64>,
    pub site: usize,
    /// Row-major over (beta, mu).
    pub energy_density: Vec<f64>,
    pub charge_density: Vec<f64>,
    pub site_entropy: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurfaceField {
    Energy,
    Charge,
    Entropy,
}

impl ThermalSurface {
    pub fn compute(spectrum: &Spectrum, betas: &[f64], mus: &[f64], site: usize) -> Result<Self> {
        let charges = spectrum.charges().ok_or(Error::NotQutrit)?;
        let energies = spectrum.energies();
        let reductions = EigenstateReductions::new(spectrum, &[site])?;
        let l = spectrum.sites as f64;
        let mut out = Self {
            betas: betas.to_vec(),
            mus: mus.to_vec(),
            site,
            energy_density: Vec::new(),
            charge_density: Vec::new(),
            site_entropy: Vec::new(),
        };
        for &b in betas {
            for &mu in mus {
                let w = gibbs_weights(&energies, Some(&charges), GibbsParams::from_beta_mu(b, mu))?;
                out.energy_density.push(weighted_mean(&w, &energies) / l);
                out.charge_density.push(weighted_mean(&w, &charges) / l);
                out.site_entropy.push(von_neumann_entropy(&reductions.mix(&w)?)?);
            }
        }
        Ok(out)
    }

    fn field(&self, f: SurfaceField) -> &[f64] {
        match f {
            SurfaceField::Energy => &self.energy_density,
            SurfaceField::Charge => &self.charge_density,
            SurfaceField::Entropy => &self.site_entropy,
        }
    }

    /// `None` outside the grid.
    pub fn interpolate(&self, f: SurfaceField, beta: f64, mu: f64) -> Option<f64> {
        let (i, tb) = bracket(&self.betas, beta)?;
        let (j, tm) = bracket(&self.mus, mu)?;
        let n = self.mus.len();
        let v = self.field(f);
        let at = |a: usize, b: usize| v[a * n + b];
        let j1 = (j + 1).min(n - 1);
        let i1 = (i + 1).min(self.betas.len() - 1);
        Some(
            (1.0 - tb) * (1.0 - tm) * at(i, j)
                + (1.0 - tb) * tm * at(i, j1)
                + tb * (1.0 - tm) * at(i1, j)
                + tb * tm * at(i1, j1),
        )
    }
}

fn bracket(grid: &[f64], x: f64) -> Option<(usize, f64)> {
    if grid.is_empty() || x < grid[0] || x > grid[grid.len() - 1] {
        return None;
    }
    if grid.len() == 1 {
        return Some((0, 0.0));
    }
    let k = grid.partition_point(|&g| g <= x).clamp(1, grid.len() - 1) - 1;
    Some((k, (x - grid[k]) / (grid[k + 1] - grid[k])))
}
