//! Unfolding and nearest-neighbour level-spacing statistics.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_DEGREE: usize = 10;
pub const DEFAULT_TRIM: f64 = 0.025;
pub const DEFAULT_BINS: usize = 40;
pub const DEFAULT_S_MAX: f64 = 4.0;

const MIN_LEVELS: usize = 50;
const MIN_CLASSIFY: usize = 100;
const MAX_CONDITION: f64 = 1e12;
const DEGENERATE_GAP: f64 = 1e-10;
const DEGENERATE_FRACTION: f64 = 0.2;
const INTERMEDIATE_MARGIN: f64 = 0.25;
const REFERENCE_FLOOR: f64 = 1e-3;

/// Result of mapping a spectrum through its smoothed counting function.
#[derive(Clone, Debug)]
pub struct Unfolded {
    pub spacings: Vec<f64>,
    /// Number of mapped spacings that came out negative and were set to 0.
    pub clamped: usize,
    pub trimmed_fraction: f64,
    /// Mean before the final rescaling.
    pub raw_mean: f64,
}

fn chebyshev_row(x: f64, degree: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(degree + 1);
    t.push(1.0);
    if degree >= 1 {
        t.push(x);
    }
    for k in 2..=degree {
        let next = 2.0 * x * t[k - 1] - t[k - 2];
        t.push(next);
    }
    t
}

/// Unfolds an ascending spectrum: the counting staircase N(E_i) = i of the
/// trimmed levels is fit with a degree-`degree` Chebyshev series, spacings
/// are differences of the fitted N, and the result is scaled to unit mean.
pub fn unfold(eigenvalues: &[f64], degree: usize, trim: f64) -> Result<Unfolded> {
    if degree == 0 {
        return Err(Error::InvalidSpec("unfolding degree must be at least 1".into()));
    }
    if !(0.0..0.5).contains(&trim) {
        return Err(Error::InvalidSpec(format!("trim fraction {trim} outside [0, 0.5)")));
    }
    let n = eigenvalues.len();
    let cut = (trim * n as f64).floor() as usize;
    let kept = &eigenvalues[cut.min(n)..n.saturating_sub(cut).max(cut.min(n))];
    if kept.len() < MIN_LEVELS {
        return Err(Error::InsufficientLevels {
            available: kept.len(),
            required: MIN_LEVELS,
        });
    }
    let lo = kept[0];
    let hi = kept[kept.len() - 1];
    let half = 0.5 * (hi - lo);
    if half <= 0.0 {
        return Err(Error::IllConditionedFit { condition: f64::INFINITY });
    }
    let mid = 0.5 * (hi + lo);
    let xs: Vec<f64> = kept.iter().map(|e| (e - mid) / half).collect();

    let m = kept.len();
    let cols = degree + 1;
    let mut a = DMatrix::<f64>::zeros(m, cols);
    for (i, &x) in xs.iter().enumerate() {
        for (k, v) in chebyshev_row(x, degree).into_iter().enumerate() {
            a[(i, k)] = v;
        }
    }
    let b = DVector::from_iterator(m, (0..m).map(|i| i as f64));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < MAX_CONDITION) {
        return Err(Error::IllConditionedFit { condition });
    }
    let coef = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::NoConvergence(format!("unfolding fit: {e}")))?;
    let fitted = &a * coef;

    let mut clamped = 0;
    let mut spacings: Vec<f64> = fitted
        .as_slice()
        .windows(2)
        .map(|w| {
            let s = w[1] - w[0];
            if s < 0.0 {
                clamped += 1;
                0.0
            } else {
                s
            }
        })
        .collect();
    let raw_mean = spacings.iter().sum::<f64>() / spacings.len() as f64;
    if raw_mean <= 0.0 {
        return Err(Error::IllConditionedFit { condition });
    }
    for s in &mut spacings {
        *s /= raw_mean;
    }
    Ok(Unfolded {
        spacings,
        clamped,
        trimmed_fraction: 2.0 * cut as f64 / n as f64,
        raw_mean,
    })
}

/// Wigner surmise `A s^beta exp(-B s^2)` with unit norm and unit mean.
pub fn surmise(beta: u32, s: f64) -> Result<f64> {
    let (a, b) = match beta {
        1 => (PI / 2.0, PI / 4.0),
        2 => (32.0 / (PI * PI), 4.0 / PI),
        4 => (2f64.powi(18) / (3f64.powi(6) * PI.powi(3)), 64.0 / (9.0 * PI)),
        other => return Err(Error::UnsupportedBeta(other)),
    };
    Ok(a * s.powi(beta as i32) * (-b * s * s).exp())
}

pub fn poisson(s: f64) -> f64 {
    (-s).exp()
}

#[derive(Clone, Debug, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    /// Spacings that fell inside the binned range.
    pub counted: usize,
}

impl Histogram {
    pub fn new(samples: &[f64], bins: usize, s_max: f64) -> Self {
        let width = s_max / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| k as f64 * width).collect();
        let mut counts = vec![0usize; bins];
        for &s in samples {
            if (0.0..=s_max).contains(&s) {
                let k = ((s / width) as usize).min(bins - 1);
                counts[k] += 1;
            }
        }
        let counted: usize = counts.iter().sum();
        let norm = if counted > 0 { counted as f64 * width } else { 1.0 };
        let density = counts.iter().map(|&c| c as f64 / norm).collect();
        Self { edges, density, counted }
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn width(&self, k: usize) -> f64 {
        self.edges[k + 1] - self.edges[k]
    }

    pub fn integral(&self) -> f64 {
        (0..self.density.len()).map(|k| self.density[k] * self.width(k)).sum()
    }
}

/// Average of `f` over `[a, b]` by 32-point Gauss-free midpoint rule; the
/// densities are smooth so this is accurate well beyond histogram noise.
fn bin_average(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const N: usize = 32;
    let h = (b - a) / N as f64;
    (0..N).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() / N as f64
}

#[derive(Clone, Debug)]
pub struct SpacingDistribution {
    pub spacings: Vec<f64>,
    pub histogram: Histogram,
    pub mean_spacing: f64,
    pub trimmed_fraction: f64,
    pub clamped: usize,
    /// Fraction of raw gaps below the degeneracy threshold.
    pub degenerate_fraction: f64,
    pub levels: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct UnfoldOptions {
    pub degree: usize,
    pub trim: f64,
    pub bins: usize,
    pub s_max: f64,
}

impl Default for UnfoldOptions {
    fn default() -> Self {
        Self {
            degree: DEFAULT_DEGREE,
            trim: DEFAULT_TRIM,
            bins: DEFAULT_BINS,
            s_max: DEFAULT_S_MAX,
        }
    }
}

impl SpacingDistribution {
    pub fn from_levels(eigenvalues: &[f64], opts: UnfoldOptions) -> Result<Self> {
        let mut e = eigenvalues.to_vec();
        e.sort_by(f64::total_cmp);
        let degenerate_fraction = raw_degenerate_fraction(&e);
        let u = unfold(&e, opts.degree, opts.trim)?;
        let mean_spacing = u.spacings.iter().sum::<f64>() / u.spacings.len() as f64;
        let histogram = Histogram::new(&u.spacings, opts.bins, opts.s_max);
        Ok(Self {
            histogram,
            mean_spacing,
            trimmed_fraction: u.trimmed_fraction,
            clamped: u.clamped,
            degenerate_fraction,
            levels: e.len(),
            spacings: u.spacings,
        })
    }

    /// Spacings taken as already unfolded (synthetic input).
    pub fn from_spacings(spacings: Vec<f64>, bins: usize, s_max: f64) -> Self {
        let mean_spacing = spacings.iter().sum::<f64>() / spacings.len().max(1) as f64;
        let histogram = Histogram::new(&spacings, bins, s_max);
        Self {
            histogram,
            mean_spacing,
            trimmed_fraction: 0.0,
            clamped: 0,
            degenerate_fraction: 0.0,
            levels: spacings.len() + 1,
            spacings,
        }
    }

    /// Bin-averaged reference densities on the histogram binning.
    pub fn references(&self) -> (Vec<f64>, Vec<f64>) {
        let e = &self.histogram.edges;
        let wd = e
            .windows(2)
            .map(|w| bin_average(|s| surmise(1, s).unwrap(), w[0], w[1]))
            .collect();
        let po = e.windows(2).map(|w| bin_average(poisson, w[0], w[1])).collect();
        (wd, po)
    }
}

fn raw_degenerate_fraction(sorted: &[f64]) -> f64 {
    if sorted.len() < 2 {
        return 0.0;
    }
    let range = sorted[sorted.len() - 1] - sorted[0];
    let tol = DEGENERATE_GAP * range;
    let small = sorted.windows(2).filter(|w| w[1] - w[0] <= tol).count();
    small as f64 / (sorted.len() - 1) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SpacingClass {
    WignerDyson,
    Poisson,
    Intermediate,
    Degenerate,
}

#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    /// `None` when there are too few spacings for a verdict.
    pub class: Option<SpacingClass>,
    pub chi2_wigner: f64,
    pub chi2_poisson: f64,
    pub low_confidence: bool,
    pub spacings: usize,
    pub degenerate_fraction: f64,
}

/// Symmetric chi-square distance `sum (h - p)^2 / (h + p) ds` over bins where
/// either reference density exceeds 1e-3.
pub fn chi2_distance(hist: &Histogram, reference: &[f64], mask: &[bool]) -> f64 {
    let mut total = 0.0;
    for k in 0..hist.density.len() {
        if !mask[k] {
            continue;
        }
        let h = hist.density[k];
        let p = reference[k];
        if h + p > 0.0 {
            total += (h - p).powi(2) / (h + p) * hist.width(k);
        }
    }
    total
}

pub fn classify_spacing(dist: &SpacingDistribution) -> Classification {
    let (wd, po) = dist.references();
    let mask: Vec<bool> = wd
        .iter()
        .zip(&po)
        .map(|(a, b)| *a > REFERENCE_FLOOR || *b > REFERENCE_FLOOR)
        .collect();
    let chi2_wigner = chi2_distance(&dist.histogram, &wd, &mask);
    let chi2_poisson = chi2_distance(&dist.histogram, &po, &mask);
    let n = dist.spacings.len();
    let low_confidence = n < MIN_CLASSIFY;
    let class = if dist.degenerate_fraction > DEGENERATE_FRACTION {
        Some(SpacingClass::Degenerate)
    } else if low_confidence {
        None
    } else if (chi2_wigner - chi2_poisson).abs() / chi2_wigner.max(chi2_poisson) < INTERMEDIATE_MARGIN {
        Some(SpacingClass::Intermediate)
    } else if chi2_wigner < chi2_poisson {
        Some(SpacingClass::WignerDyson)
    } else {
        Some(SpacingClass::Poisson)
    };
    Classification {
        class,
        chi2_wigner,
        chi2_poisson,
        low_confidence,
        spacings: n,
        degenerate_fraction: dist.degenerate_fraction,
    }
}
