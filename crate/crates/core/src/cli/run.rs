use std::path::PathBuf;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{
    EthParams, EvolveParams, ExperimentConfig, ExperimentKind, StateKind, SweepParameter, ThermalParams,
};
use super::output::{slug, Cell, Manifest, OutputDir, Table};
use super::selector::{operator_selector, Observable};
use crate::dynamics::{
    charge_profile, map_trajectory, moments_from_weights, product_ensemble, quantile_sorted, random_microcanonical_state,
    stream_rng, uniform_grid, EnergyTarget, ProductKind, ProductStateSpec, StateVector,
};
use crate::ensembles::{
    gibbs_weights, solve_beta, solve_beta_gamma, weighted_mean, GibbsParams, MicrocanonicalWindow, ThermalSurface,
};
use crate::entanglement::{mixed_reduce, von_neumann_entropy, Bipartition};
use crate::error::{Error, Result};
use crate::eth::{
    counter_diagonal_average, diag_offdiag_ratio, eigenstate_scatter, elements_in_basis, random_fixed_spectrum_operator,
    scaling_fit, sorted_eigenbasis, ScatterQuantity,
};
use crate::lattice::{ChainKind, HamiltonianSpec, OperatorMatrix};
use crate::spectral::{classify_spacing, SpacingDistribution, Spectrum, UnfoldOptions};

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Runs one experiment and writes its data files plus `manifest.json`.
pub fn run(kind: ExperimentKind, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Manifest> {
    cfg.validate(kind)?;
    let start = Instant::now();
    let seed = opts.seed.unwrap_or(cfg.master_seed);
    let root = opts.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let mut out = OutputDir::create(&root)?;
    let summary = match kind {
        ExperimentKind::Spectrum => run_spectrum(cfg, &mut out)?,
        ExperimentKind::Levels => run_levels(cfg, &mut out)?,
        ExperimentKind::Evolve => run_evolve(cfg, seed, &mut out)?,
        ExperimentKind::Eth => run_eth(cfg, seed, &mut out)?,
        ExperimentKind::Thermal => run_thermal(cfg, &mut out)?,
        ExperimentKind::ChargeSpread => run_chargespread(cfg, &mut out)?,
        ExperimentKind::Sweep => run_sweep(cfg, seed, &mut out)?,
    };
    let manifest = Manifest {
        command: kind.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        config: serde_json::to_value(cfg)?,
        files: out.files.clone(),
        summary,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(root.join("manifest.json"), text)?;
    Ok(manifest)
}

/// [`run`] inside a dedicated pool of `threads` workers.
pub fn run_with_threads(
    kind: ExperimentKind,
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    threads: usize,
) -> Result<Manifest> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run(kind, cfg, opts))
}

fn build_spectrum(spec: &HamiltonianSpec, cfg: &ExperimentConfig) -> Result<Spectrum> {
    Spectrum::build(spec, &cfg.symmetries)
}

fn block_label(s: &Spectrum, b: usize) -> String {
    s.blocks[b]
        .sector
        .map(|l| l.to_string())
        .filter(|l| !l.is_empty())
        .unwrap_or_else(|| "full".to_string())
}

fn run_spectrum(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let s = build_spectrum(&cfg.hamiltonian, cfg)?;
    let mut levels = Table::new(["index", "block", "sector", "energy"]);
    let mut sectors = Table::new(["block", "sector", "dim", "e_min", "e_max"]);
    for (b, block) in s.blocks.iter().enumerate() {
        let label = block_label(&s, b);
        for (i, &e) in block.eigenvalues.iter().enumerate() {
            levels.push(vec![(s.offsets()[b] + i).into(), b.into(), label.clone().into(), e.into()]);
        }
        let lo = block.eigenvalues.first().copied().unwrap_or(f64::NAN);
        let hi = block.eigenvalues.last().copied().unwrap_or(f64::NAN);
        sectors.push(vec![b.into(), label.into(), block.dim().into(), lo.into(), hi.into()]);
    }
    out.write_table("spectrum.csv", &levels)?;
    out.write_table("sectors.csv", &sectors)?;
    Ok(json!({
        "full_dim": s.full_dim(),
        "blocks": s.blocks.len(),
        "e_min": s.min_energy(),
        "e_max": s.max_energy(),
    }))
}

#[derive(Serialize)]
struct LevelSummary {
    label: String,
    dim: usize,
    class: Option<crate::spectral::SpacingClass>,
    chi2_wigner: f64,
    chi2_poisson: f64,
    low_confidence: bool,
    spacings: usize,
    degenerate_fraction: f64,
    clamped: usize,
    trimmed_fraction: f64,
}

fn run_levels(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let p = cfg.levels.clone().unwrap_or_default();
    let s = build_spectrum(&cfg.hamiltonian, cfg)?;
    let opts = UnfoldOptions {
        degree: p.degree,
        trim: p.trim,
        bins: p.bins,
        s_max: p.s_max,
    };
    let mut sets: Vec<(String, Vec<f64>)> = s
        .blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| b.dim() >= p.min_dim)
        .map(|(k, b)| (block_label(&s, k), b.eigenvalues.clone()))
        .collect();
    if p.include_full && s.blocks.len() > 1 {
        sets.push(("all".to_string(), s.energies()));
    }
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for (label, e) in sets {
        let dist = match SpacingDistribution::from_levels(&e, opts) {
            Ok(d) => d,
            Err(err @ (Error::InsufficientLevels { .. } | Error::IllConditionedFit { .. })) => {
                skipped.push(json!({"label": label, "dim": e.len(), "reason": err.to_string()}));
                continue;
            }
            Err(err) => return Err(err),
        };
        let c = classify_spacing(&dist);
        let (wd, po) = dist.references();
        let mut t = Table::new(["s", "density", "wigner_dyson", "poisson"]);
        for (k, x) in dist.histogram.centers().into_iter().enumerate() {
            t.push_floats(&[x, dist.histogram.density[k], wd[k], po[k]]);
        }
        out.write_table(&format!("levels_{}.csv", slug(&label)), &t)?;
        results.push(LevelSummary {
            label,
            dim: e.len(),
            class: c.class,
            chi2_wigner: c.chi2_wigner,
            chi2_poisson: c.chi2_poisson,
            low_confidence: c.low_confidence,
            spacings: c.spacings,
            degenerate_fraction: c.degenerate_fraction,
            clamped: dist.clamped,
            trimmed_fraction: dist.trimmed_fraction,
        });
    }
    let summary = json!({"sectors": results, "skipped": skipped});
    out.write_json("classification.json", &summary)?;
    Ok(summary)
}

/// Observables resolved against one chain.
struct Probes {
    names: Vec<String>,
    items: Vec<Probe>,
}

enum Probe {
    Operator(OperatorMatrix),
    Entropy(Vec<usize>, Bipartition),
}

impl Probes {
    fn new(names: &[String], spec: &HamiltonianSpec, h: Option<&OperatorMatrix>) -> Result<Self> {
        let d = spec.site_dim();
        let items = names
            .iter()
            .map(|n| {
                Ok(match Observable::parse(n, spec.sites, d, h)? {
                    Observable::Operator(op) => Probe::Operator(op),
                    Observable::Entropy(sites) => {
                        let b = Bipartition::new(&sites, spec.sites, d)?;
                        Probe::Entropy(sites, b)
                    }
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            names: names.to_vec(),
            items,
        })
    }

    fn eval(&self, psi: &[Complex64]) -> Result<Vec<f64>> {
        self.items
            .iter()
            .map(|p| match p {
                Probe::Operator(op) => Ok(op.expectation(psi).re),
                Probe::Entropy(_, b) => von_neumann_entropy(&b.reduce(psi)?),
            })
            .collect()
    }

    /// Value in the mixture `sum_i w_i |E_i><E_i|`.
    fn mixed(&self, k: usize, w: &[f64], s: &Spectrum, diag: &[Option<Vec<f64>>]) -> Result<f64> {
        match &self.items[k] {
            Probe::Operator(_) => Ok(weighted_mean(w, diag[k].as_ref().unwrap())),
            Probe::Entropy(sites, _) => von_neumann_entropy(&mixed_reduce(w, s, sites)?),
        }
    }

    fn diagonals(&self, s: &Spectrum) -> Result<Vec<Option<Vec<f64>>>> {
        self.items
            .iter()
            .map(|p| match p {
                Probe::Operator(op) => s.diagonal_elements(op).map(Some),
                Probe::Entropy(..) => Ok(None),
            })
            .collect()
    }
}

struct StateRecord {
    index: u64,
    energy: f64,
    energy_std: f64,
    charge: Option<f64>,
    /// `series[k][t]` for observable `k`.
    series: Vec<Vec<f64>>,
}

struct EvolveResult {
    times: Vec<f64>,
    probes: Probes,
    states: Vec<StateRecord>,
    late_fraction: f64,
}

impl EvolveResult {
    /// Ensemble mean of per-state late means and of per-state late standard
    /// deviations, per observable.
    fn late(&self) -> Vec<(f64, f64)> {
        let n = self.states.len() as f64;
        (0..self.probes.items.len())
            .map(|k| {
                let (m, s) = self.states.iter().fold((0.0, 0.0), |acc, st| {
                    let (m, s) = crate::dynamics::late_stats(&st.series[k], self.late_fraction);
                    (acc.0 + m, acc.1 + s)
                });
                (m / n, s / n)
            })
            .collect()
    }

    fn mean_energy(&self) -> f64 {
        self.states.iter().map(|s| s.energy).sum::<f64>() / self.states.len() as f64
    }

    fn mean_charge(&self) -> Option<f64> {
        let q: Option<Vec<f64>> = self.states.iter().map(|s| s.charge).collect();
        q.map(|q| q.iter().sum::<f64>() / q.len() as f64)
    }
}

fn prepare_states(p: &EvolveParams, spec: &HamiltonianSpec, s: &Spectrum, seed: u64) -> Result<Vec<StateVector>> {
    match p.state {
        StateKind::Basis => Ok(vec![StateVector::basis(&p.digits, spec.site_dim())?]),
        StateKind::Product => {
            let ps = ProductStateSpec {
                kind: match spec.kind {
                    ChainKind::Qubit => ProductKind::RandomQubit,
                    ChainKind::Qutrit => ProductKind::RandomQutritF,
                },
                sites: spec.sites,
                f: p.f.clone(),
                seed,
                index: 0,
                target: p.target_energy.map(|energy| EnergyTarget {
                    energy,
                    tol: p.energy_tol,
                }),
                max_attempts: p.max_attempts,
            };
            let terms = spec.terms()?;
            product_ensemble(&ps, Some(&terms), p.count)
        }
        StateKind::Microcanonical => {
            let c = p.window_center.unwrap();
            let e = s.energies();
            let charges = s.charges();
            let w = MicrocanonicalWindow::select(&e, c - p.window_half_width, c + p.window_half_width, |i| {
                match (p.window_charge, &charges) {
                    (Some(q), Some(ch)) => ch[i] == q as f64,
                    _ => true,
                }
            })?;
            (0..p.count as u64)
                .into_par_iter()
                .map(|i| random_microcanonical_state(s, &w, seed, i))
                .collect()
        }
    }
}

fn evolve_core(p: &EvolveParams, spec: &HamiltonianSpec, s: &Spectrum, h: &OperatorMatrix, seed: u64) -> Result<EvolveResult> {
    let probes = Probes::new(&p.observables, spec, Some(h))?;
    let times = uniform_grid(p.t0, p.t1, p.step)?;
    let states = prepare_states(p, spec, s, seed)?;
    let energies = s.energies();
    let charges = s.charges();
    let records = states
        .par_iter()
        .map(|st| {
            let w: Vec<f64> = s.project(&st.amplitudes)?.iter().map(|c| c.norm_sqr()).collect();
            let energy = weighted_mean(&w, &energies);
            let var = moments_from_weights(&w, &energies, 2)[0];
            let charge = charges.as_ref().map(|q| weighted_mean(&w, q));
            let mut series = vec![Vec::with_capacity(times.len()); probes.items.len()];
            map_trajectory(s, st, &times, |psi| {
                for (k, v) in probes.eval(psi)?.into_iter().enumerate() {
                    series[k].push(v);
                }
                Ok(0.0)
            })?;
            Ok(StateRecord {
                index: st.provenance.index,
                energy,
                energy_std: var.max(0.0).sqrt(),
                charge,
                series,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvolveResult {
        times,
        probes,
        states: records,
        late_fraction: p.late_fraction,
    })
}

#[derive(Serialize)]
struct Prediction {
    gibbs: Option<f64>,
    microcanonical: Option<f64>,
    beta: Option<f64>,
    gamma: Option<f64>,
}

/// Gibbs (and, for qubit chains, microcanonical) values of every observable
/// at the ensemble-mean energy and charge.
fn predictions(r: &EvolveResult, s: &Spectrum, half_width: f64) -> Result<Vec<Prediction>> {
    let energies = s.energies();
    let diag = r.probes.diagonals(s)?;
    let e = r.mean_energy();
    let (w, beta, gamma) = match (r.mean_charge(), s.charges()) {
        (Some(q), Some(ch)) => {
            let g = solve_beta_gamma(&energies, &ch, e, q)?;
            (gibbs_weights(&energies, Some(&ch), g)?, g.beta, g.gamma)
        }
        _ => {
            let b = solve_beta(&energies, e)?;
            (gibbs_weights(&energies, None, GibbsParams::beta(b))?, b, None)
        }
    };
    let window = if s.charges().is_none() {
        Some(MicrocanonicalWindow::centered(&energies, e, half_width)?)
    } else {
        None
    };
    (0..r.probes.items.len())
        .map(|k| {
            let micro = match &window {
                Some(win) => Some(r.probes.mixed(k, &win.weights(s.full_dim()), s, &diag)?),
                None => None,
            };
            Ok(Prediction {
                gibbs: Some(r.probes.mixed(k, &w, s, &diag)?),
                microcanonical: micro,
                beta: Some(beta),
                gamma,
            })
        })
        .collect()
}

fn quantile_header(q: f64) -> String {
    format!("q{:02}", (q * 100.0).round() as i64)
}

fn run_evolve(cfg: &ExperimentConfig, seed: u64, out: &mut OutputDir) -> Result<Value> {
    let p = cfg.evolve.as_ref().unwrap();
    let s = build_spectrum(&cfg.hamiltonian, cfg)?;
    let r = evolve_core(p, &cfg.hamiltonian, &s, &cfg.hamiltonian.build()?, seed)?;
    let mut column = Vec::with_capacity(r.states.len());
    for k in 0..r.probes.items.len() {
        let mut header = vec!["t".to_string(), "mean".to_string()];
        header.extend(p.quantiles.iter().map(|&q| quantile_header(q)));
        let mut t = Table::new(header);
        for (ti, &time) in r.times.iter().enumerate() {
            column.clear();
            column.extend(r.states.iter().map(|st| st.series[k][ti]));
            let mean = column.iter().sum::<f64>() / column.len() as f64;
            column.sort_by(f64::total_cmp);
            let mut row = vec![time, mean];
            row.extend(p.quantiles.iter().map(|&q| quantile_sorted(&column, q)));
            t.push_floats(&row);
        }
        out.write_table(&format!("observable_{k}.csv"), &t)?;
    }
    let qutrit = cfg.is_qutrit();
    let mut header = vec!["index".to_string(), "energy".to_string(), "energy_std".to_string()];
    if qutrit {
        header.push("charge".to_string());
    }
    for k in 0..r.probes.items.len() {
        for f in ["initial", "final", "late_mean", "late_std"] {
            header.push(format!("o{k}_{f}"));
        }
    }
    let mut t = Table::new(header);
    for st in &r.states {
        let mut row: Vec<Cell> = vec![(st.index as i64).into(), st.energy.into(), st.energy_std.into()];
        if qutrit {
            row.push(st.charge.unwrap_or(f64::NAN).into());
        }
        for series in &st.series {
            let (m, sd) = crate::dynamics::late_stats(series, p.late_fraction);
            row.extend([series[0].into(), (*series.last().unwrap()).into(), m.into(), sd.into()]);
        }
        t.push(row);
    }
    out.write_table("states.csv", &t)?;
    let late = r.late();
    let preds = if p.predictions {
        Some(predictions(&r, &s, p.window_half_width)?)
    } else {
        None
    };
    let observables: Vec<Value> = r
        .probes
        .names
        .iter()
        .enumerate()
        .map(|(k, n)| {
            json!({
                "name": n,
                "file": format!("observable_{k}.csv"),
                "late_mean": late[k].0,
                "late_std": late[k].1,
                "prediction": preds.as_ref().map(|p| &p[k]),
            })
        })
        .collect();
    Ok(json!({
        "states": r.states.len(),
        "mean_energy": r.mean_energy(),
        "mean_charge": r.mean_charge(),
        "observables": observables,
    }))
}

fn run_sweep(cfg: &ExperimentConfig, seed: u64, out: &mut OutputDir) -> Result<Value> {
    let sweep = cfg.sweep.as_ref().unwrap();
    let base = cfg.evolve.as_ref().unwrap();
    let mut header = vec!["value".to_string(), "mean_energy".to_string()];
    for k in 0..base.observables.len() {
        for f in ["late_mean", "late_std", "gibbs", "microcanonical"] {
            header.push(format!("o{k}_{f}"));
        }
    }
    let mut t = Table::new(header);
    let mut rows = Vec::new();
    // the chain only changes when sweeping its length
    let mut shared = None;
    if sweep.parameter != SweepParameter::Sites {
        shared = Some((build_spectrum(&cfg.hamiltonian, cfg)?, cfg.hamiltonian.build()?));
    }
    for &v in &sweep.values {
        let mut spec = cfg.hamiltonian.clone();
        let mut p = base.clone();
        match sweep.parameter {
            SweepParameter::Sites => spec.sites = v as usize,
            SweepParameter::Energy => match p.state {
                StateKind::Microcanonical => p.window_center = Some(v),
                _ => p.target_energy = Some(v),
            },
            SweepParameter::F => p.f = vec![v],
        }
        let own;
        let (s, h) = match &shared {
            Some((s, h)) => (s, h),
            None => {
                own = (build_spectrum(&spec, cfg)?, spec.build()?);
                (&own.0, &own.1)
            }
        };
        let r = evolve_core(&p, &spec, s, h, seed)?;
        let late = r.late();
        let preds = predictions(&r, s, p.window_half_width)?;
        let mut row = vec![v, r.mean_energy()];
        for (l, pr) in late.iter().zip(&preds) {
            row.extend([l.0, l.1, pr.gibbs.unwrap_or(f64::NAN), pr.microcanonical.unwrap_or(f64::NAN)]);
        }
        t.push_floats(&row);
        rows.push(json!({"value": v, "mean_energy": r.mean_energy(), "beta": preds.first().and_then(|p| p.beta)}));
    }
    out.write_table("sweep.csv", &t)?;
    Ok(json!({"parameter": sweep.parameter, "observables": base.observables, "points": rows}))
}

fn run_eth(cfg: &ExperimentConfig, seed: u64, out: &mut OutputDir) -> Result<Value> {
    let p: &EthParams = cfg.eth.as_ref().unwrap();
    let mut summary = serde_json::Map::new();
    if !p.scatter.is_empty() {
        let spec = &cfg.hamiltonian;
        let h = spec.build()?;
        let s = build_spectrum(spec, cfg)?;
        let mut files = Vec::new();
        for (k, name) in p.scatter.iter().enumerate() {
            let obs = Observable::parse(name, spec.sites, spec.site_dim(), Some(&h))?;
            let points = match &obs {
                Observable::Operator(op) => eigenstate_scatter(&s, ScatterQuantity::Expectation(op))?,
                Observable::Entropy(sites) => eigenstate_scatter(&s, ScatterQuantity::Entropy(sites))?,
            };
            let mut t = Table::new(["energy", "value", "block", "sector"]);
            for pt in points {
                t.push(vec![pt.energy.into(), pt.value.into(), pt.block.into(), block_label(&s, pt.block).into()]);
            }
            let file = format!("scatter_{k}.csv");
            out.write_table(&file, &t)?;
            files.push(json!({"name": name, "file": file}));
        }
        summary.insert("scatter".into(), Value::Array(files));
    }
    if !p.sizes.is_empty() {
        let mut ratio_rows = Vec::new();
        let mut cd_rows = Vec::new();
        for &l in &p.sizes {
            let mut spec = cfg.hamiltonian.clone();
            spec.sites = l;
            let s = build_spectrum(&spec, cfg)?;
            let (e, v) = sorted_eigenbasis(&s)?;
            let ratios = p
                .ratio_operators
                .par_iter()
                .map(|name| {
                    let op = operator_selector(name, l, spec.site_dim(), None)?;
                    Ok(diag_offdiag_ratio(&elements_in_basis(&e, &v, &op)?)?.ratio)
                })
                .collect::<Result<Vec<_>>>()?;
            ratio_rows.push((l, ratios));
            if p.random_operators > 0 {
                let mut rng = stream_rng(seed, l as u64);
                let ops = (0..p.random_operators)
                    .map(|_| random_fixed_spectrum_operator(l, &mut rng).map(|(_, op)| op))
                    .collect::<Result<Vec<_>>>()?;
                let vals = ops
                    .par_iter()
                    .map(|op| counter_diagonal_average(&elements_in_basis(&e, &v, op)?))
                    .collect::<Result<Vec<_>>>()?;
                cd_rows.push((l, vals.iter().sum::<f64>() / vals.len() as f64));
            }
        }
        let mut fits = serde_json::Map::new();
        if !p.ratio_operators.is_empty() {
            let mut header = vec!["L".to_string()];
            header.extend(p.ratio_operators.iter().cloned());
            let mut t = Table::new(header);
            for (l, r) in &ratio_rows {
                let mut row: Vec<Cell> = vec![(*l).into()];
                row.extend(r.iter().map(|&x| x.into()));
                t.push(row);
            }
            out.write_table("ratio.csv", &t)?;
            for (k, name) in p.ratio_operators.iter().enumerate() {
                let pts: Vec<(f64, f64)> = ratio_rows.iter().map(|(l, r)| (*l as f64, r[k])).collect();
                let vals: Vec<f64> = pts.iter().map(|p| p.1).collect();
                let max = vals.iter().cloned().fold(f64::MIN, f64::max);
                let min = vals.iter().cloned().fold(f64::MAX, f64::min);
                fits.insert(
                    name.clone(),
                    json!({
                        "log_fit": scaling_fit(&pts, true).ok(),
                        "monotone_increasing": vals.windows(2).all(|w| w[1] > w[0]),
                        "max_over_min": max / min,
                    }),
                );
            }
        }
        if !cd_rows.is_empty() {
            let mut t = Table::new(["L", "counter_diagonal", "ln_counter_diagonal"]);
            for &(l, d) in &cd_rows {
                t.push(vec![l.into(), d.into(), d.ln().into()]);
            }
            out.write_table("counterdiag.csv", &t)?;
            let pts: Vec<(f64, f64)> = cd_rows.iter().map(|&(l, d)| (l as f64, d)).collect();
            fits.insert("counter_diagonal".into(), json!({"log_fit": scaling_fit(&pts, true).ok()}));
        }
        summary.insert("fits".into(), Value::Object(fits.clone()));
        out.write_json("fits.json", &fits)?;
    }
    Ok(Value::Object(summary))
}

fn run_thermal(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let p: &ThermalParams = cfg.thermal.as_ref().unwrap();
    let spec = &cfg.hamiltonian;
    let h = spec.build()?;
    let s = build_spectrum(spec, cfg)?;
    let energies = s.energies();
    let charges = s.charges();
    let probes = Probes::new(&p.observables, spec, Some(&h))?;
    let diag = probes.diagonals(&s)?;
    let mut summary = serde_json::Map::new();
    if !p.energies.is_empty() {
        let qutrit = cfg.is_qutrit();
        let mut header: Vec<String> = vec!["energy".into()];
        if qutrit {
            header.extend(["charge".into(), "beta".into(), "gamma".into(), "mu".into()]);
        } else {
            header.push("beta".into());
        }
        header.extend(p.observables.iter().cloned());
        let mut t = Table::new(header);
        for (i, &e) in p.energies.iter().enumerate() {
            let (w, mut row) = if qutrit {
                let ch = charges.as_ref().ok_or(Error::NotQutrit)?;
                let q = p.charges[i];
                let g = solve_beta_gamma(&energies, ch, e, q)?;
                let w = gibbs_weights(&energies, Some(ch), g)?;
                (w, vec![e, q, g.beta, g.gamma.unwrap_or(0.0), g.mu().unwrap_or(f64::NAN)])
            } else {
                let b = solve_beta(&energies, e)?;
                (gibbs_weights(&energies, None, GibbsParams::beta(b))?, vec![e, b])
            };
            for k in 0..probes.items.len() {
                row.push(probes.mixed(k, &w, &s, &diag)?);
            }
            t.push_floats(&row);
        }
        out.write_table("thermal.csv", &t)?;
        summary.insert("targets".into(), json!(p.energies.len()));
    }
    if let Some(g) = &p.surface {
        let surf = ThermalSurface::compute(&s, &g.betas, &g.mus, g.site)?;
        let mut t = Table::new(["beta", "mu", "energy_density", "charge_density", "site_entropy"]);
        let n = g.mus.len();
        for (i, &b) in g.betas.iter().enumerate() {
            for (j, &mu) in g.mus.iter().enumerate() {
                let k = i * n + j;
                t.push_floats(&[b, mu, surf.energy_density[k], surf.charge_density[k], surf.site_entropy[k]]);
            }
        }
        out.write_table("surface.csv", &t)?;
        summary.insert("surface_points".into(), json!(g.betas.len() * n));
    }
    Ok(Value::Object(summary))
}

fn run_chargespread(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Value> {
    let p = cfg.chargespread.as_ref().unwrap();
    let spec = &cfg.hamiltonian;
    let s = build_spectrum(spec, cfg)?;
    let times = uniform_grid(p.t0, p.t1, p.step)?;
    let state = StateVector::basis(&p.digits, 3)?;
    let profile = charge_profile(&state, &s, &times)?;
    let l = spec.sites;
    let mut header = vec!["t".to_string()];
    header.extend((1..=l).map(|r| format!("q{r}")));
    header.push("total".to_string());
    let mut t = Table::new(header);
    for (ti, &time) in times.iter().enumerate() {
        let mut row = vec![time];
        row.extend(profile.iter().map(|ps| ps.values[ti]));
        row.push(profile.iter().map(|ps| ps.values[ti]).sum());
        t.push_floats(&row);
    }
    out.write_table("charge_profile.csv", &t)?;
    let total = p.digits.iter().filter(|&&d| d == 2).count() as f64;
    let density = total / l as f64;
    let start = times.len() / 2;
    let late_max_deviation = profile
        .iter()
        .flat_map(|ps| ps.values[start..].iter())
        .map(|v| (v - density).abs())
        .fold(0.0, f64::max);
    let max_drift = profile
        .iter()
        .map(|ps| ps.values.iter().map(|v| (v - ps.values[0]).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    Ok(json!({
        "total_charge": total,
        "density": density,
        "late_max_deviation": late_max_deviation,
        "max_local_drift": max_drift,
    }))
}
