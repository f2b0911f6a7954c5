//! TOML experiment configuration.
//!
//! ```toml
//! experiment = "levels"
//! master_seed = 0
//! output_dir = "out/levels"
//! symmetries = ["parity"]
//!
//! [hamiltonian]
//! kind = "qubit"
//! sites = 10
//!
//! [levels]
//! include_full = true
//! ```
//!
//! Every table rejects unknown keys. Only the table of the selected
//! experiment is read; the others may be present (a `sweep` also reads
//! `[evolve]`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{DECILES, DEFAULT_ENERGY_TOL, DEFAULT_MAX_ATTEMPTS};
use crate::ensembles::DEFAULT_HALF_WIDTH;
use crate::error::{Error, Result};
use crate::lattice::{ChainKind, HamiltonianSpec};
use crate::sectors::Symmetry;
use crate::spectral::levels::{DEFAULT_BINS, DEFAULT_DEGREE, DEFAULT_S_MAX, DEFAULT_TRIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Spectrum,
    Levels,
    Evolve,
    Eth,
    Thermal,
    ChargeSpread,
    Sweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Spectrum => "spectrum",
            Self::Levels => "levels",
            Self::Evolve => "evolve",
            Self::Eth => "eth",
            Self::Thermal => "thermal",
            Self::ChargeSpread => "chargespread",
            Self::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the subcommand when given.
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Symmetries used to block-diagonalize the Hamiltonian.
    #[serde(default)]
    pub symmetries: Vec<Symmetry>,
    pub hamiltonian: HamiltonianSpec,
    #[serde(default)]
    pub levels: Option<LevelsParams>,
    #[serde(default)]
    pub evolve: Option<EvolveParams>,
    #[serde(default)]
    pub eth: Option<EthParams>,
    #[serde(default)]
    pub thermal: Option<ThermalParams>,
    #[serde(default)]
    pub chargespread: Option<ChargeSpreadParams>,
    #[serde(default)]
    pub sweep: Option<SweepParams>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelsParams {
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_trim")]
    pub trim: f64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_s_max")]
    pub s_max: f64,
    /// Also analyze the union of all blocks as one spectrum.
    #[serde(default)]
    pub include_full: bool,
    /// Blocks smaller than this are skipped.
    #[serde(default)]
    pub min_dim: usize,
}

impl Default for LevelsParams {
    fn default() -> Self {
        Self {
            degree: DEFAULT_DEGREE,
            trim: DEFAULT_TRIM,
            bins: DEFAULT_BINS,
            s_max: DEFAULT_S_MAX,
            include_full: false,
            min_dim: 0,
        }
    }
}

fn default_degree() -> usize {
    DEFAULT_DEGREE
}
fn default_trim() -> f64 {
    DEFAULT_TRIM
}
fn default_bins() -> usize {
    DEFAULT_BINS
}
fn default_s_max() -> f64 {
    DEFAULT_S_MAX
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    /// Random unentangled states (qubit) or fixed-f qutrit products.
    Product,
    /// A single computational basis state given by `digits`.
    Basis,
    /// Random superpositions of eigenstates in an energy window.
    Microcanonical,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveParams {
    pub state: StateKind,
    #[serde(default = "one")]
    pub count: usize,
    /// Charge fraction per site (qutrit products); one value or one per site.
    #[serde(default)]
    pub f: Vec<f64>,
    #[serde(default)]
    pub target_energy: Option<f64>,
    #[serde(default = "default_energy_tol")]
    pub energy_tol: f64,
    #[serde(default = "default_attempts")]
    pub max_attempts: u64,
    #[serde(default)]
    pub digits: Vec<usize>,
    /// Center of the microcanonical window; the charge sector can be fixed
    /// with `window_charge`.
    #[serde(default)]
    pub window_center: Option<f64>,
    #[serde(default = "default_half_width")]
    pub window_half_width: f64,
    #[serde(default)]
    pub window_charge: Option<usize>,
    #[serde(default)]
    pub t0: f64,
    pub t1: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    pub observables: Vec<String>,
    #[serde(default = "half")]
    pub late_fraction: f64,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    /// Report Gibbs and microcanonical predictions at the ensemble-mean
    /// energy (and charge, on qutrit chains).
    #[serde(default)]
    pub predictions: bool,
}

fn one() -> usize {
    1
}
fn half() -> f64 {
    0.5
}
fn default_step() -> f64 {
    1.0
}
fn default_energy_tol() -> f64 {
    DEFAULT_ENERGY_TOL
}
fn default_attempts() -> u64 {
    DEFAULT_MAX_ATTEMPTS
}
fn default_half_width() -> f64 {
    DEFAULT_HALF_WIDTH
}
fn default_quantiles() -> Vec<f64> {
    DECILES.to_vec()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EthParams {
    /// Eigenstate expectation values on the configured chain.
    #[serde(default)]
    pub scatter: Vec<String>,
    /// Chain lengths for the matrix-element scaling study.
    #[serde(default)]
    pub sizes: Vec<usize>,
    /// Operators whose diagonal/off-diagonal ratio is tracked over `sizes`.
    #[serde(default)]
    pub ratio_operators: Vec<String>,
    /// Random fixed-spectrum single-site operators per size for the
    /// counter-diagonal average (qubit chains only).
    #[serde(default)]
    pub random_operators: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalParams {
    /// Target energies.
    #[serde(default)]
    pub energies: Vec<f64>,
    /// Target charges, paired with `energies` (qutrit chains).
    #[serde(default)]
    pub charges: Vec<f64>,
    #[serde(default)]
    pub observables: Vec<String>,
    /// Optional (beta, mu) surface of densities and site entropy.
    #[serde(default)]
    pub surface: Option<SurfaceGrid>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceGrid {
    pub betas: Vec<f64>,
    pub mus: Vec<f64>,
    pub site: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargeSpreadParams {
    /// Initial basis state, one digit per site.
    pub digits: Vec<usize>,
    #[serde(default)]
    pub t0: f64,
    pub t1: f64,
    #[serde(default = "default_step")]
    pub step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Sites,
    Energy,
    F,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Config("empty configuration".into()));
        }
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn site_dim(&self) -> usize {
        self.hamiltonian.site_dim()
    }

    pub fn is_qutrit(&self) -> bool {
        self.hamiltonian.kind == ChainKind::Qutrit
    }

    /// Checks everything needed by `kind` before any computation starts.
    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let Some(k) = self.experiment {
            if k != kind {
                return bad(format!("config is for '{}' but '{}' was requested", k.name(), kind.name()));
            }
        }
        self.hamiltonian
            .validate()
            .map_err(|e| Error::Config(format!("hamiltonian: {e}")))?;
        if self.symmetries.contains(&Symmetry::Charge) && !self.is_qutrit() {
            return bad("charge symmetry needs a qutrit chain".into());
        }
        match kind {
            ExperimentKind::Spectrum => Ok(()),
            ExperimentKind::Levels => {
                let p = self.levels.clone().unwrap_or_default();
                if p.bins == 0 || !(p.s_max > 0.0) || !(0.0..0.5).contains(&p.trim) {
                    return bad("levels: need bins > 0, s_max > 0 and trim in [0, 0.5)".into());
                }
                Ok(())
            }
            ExperimentKind::Evolve => self.validate_evolve(),
            ExperimentKind::Eth => {
                let p = self.need(&self.eth, "eth")?;
                if p.scatter.is_empty() && p.sizes.is_empty() {
                    return bad("eth: nothing to do (set scatter and/or sizes)".into());
                }
                if !p.sizes.is_empty() && p.ratio_operators.is_empty() && p.random_operators == 0 {
                    return bad("eth: sizes given without ratio_operators or random_operators".into());
                }
                if p.random_operators > 0 && self.is_qutrit() {
                    return bad("eth: random fixed-spectrum operators are defined for qubit chains".into());
                }
                Ok(())
            }
            ExperimentKind::Thermal => {
                let p = self.need(&self.thermal, "thermal")?;
                if self.is_qutrit() && p.charges.len() != p.energies.len() {
                    return bad("thermal: qutrit targets need one charge per energy".into());
                }
                if !self.is_qutrit() && !p.charges.is_empty() {
                    return bad("thermal: charges are only meaningful on qutrit chains".into());
                }
                if let Some(s) = &p.surface {
                    if !self.is_qutrit() {
                        return bad("thermal: the (beta, mu) surface needs a qutrit chain".into());
                    }
                    if s.betas.is_empty() || s.mus.is_empty() {
                        return bad("thermal: empty surface grid".into());
                    }
                    if s.betas.windows(2).any(|w| w[1] <= w[0]) || s.mus.windows(2).any(|w| w[1] <= w[0]) {
                        return bad("thermal: surface grids must be increasing".into());
                    }
                }
                if p.energies.is_empty() && p.surface.is_none() {
                    return bad("thermal: nothing to do (set energies and/or surface)".into());
                }
                Ok(())
            }
            ExperimentKind::ChargeSpread => {
                let p = self.need(&self.chargespread, "chargespread")?;
                if !self.is_qutrit() {
                    return bad("chargespread needs a qutrit chain".into());
                }
                if p.digits.len() != self.hamiltonian.sites || p.digits.iter().any(|&d| d > 2) {
                    return bad("chargespread: digits must hold one value in 0..=2 per site".into());
                }
                check_grid(p.t0, p.t1, p.step)
            }
            ExperimentKind::Sweep => {
                let p = self.need(&self.sweep, "sweep")?;
                if p.values.is_empty() {
                    return bad("sweep: no values".into());
                }
                let e = self.need(&self.evolve, "evolve")?;
                if e.state == StateKind::Basis {
                    return bad("sweep: basis states cannot be swept".into());
                }
                match p.parameter {
                    SweepParameter::Sites if p.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) => {
                        bad("sweep: site counts must be positive integers".into())
                    }
                    SweepParameter::F if !self.is_qutrit() || e.state != StateKind::Product => {
                        bad("sweep: f sweeps need qutrit product states".into())
                    }
                    _ => self.validate_evolve(),
                }
            }
        }
    }

    fn need<'a, T>(&self, t: &'a Option<T>, name: &str) -> Result<&'a T> {
        t.as_ref()
            .ok_or_else(|| Error::Config(format!("missing [{name}] table")))
    }

    fn validate_evolve(&self) -> Result<()> {
        let p = self.need(&self.evolve, "evolve")?;
        let bad = |m: &str| Err(Error::Config(format!("evolve: {m}")));
        if p.count == 0 {
            return bad("count must be positive");
        }
        if p.observables.is_empty() {
            return bad("no observables");
        }
        if !(p.late_fraction > 0.0 && p.late_fraction <= 1.0) {
            return bad("late_fraction must lie in (0, 1]");
        }
        if p.quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return bad("quantiles must lie in [0, 1]");
        }
        match p.state {
            StateKind::Product if self.is_qutrit() && p.f.is_empty() => bad("qutrit product states need f"),
            StateKind::Basis if p.digits.len() != self.hamiltonian.sites => bad("digits must have one entry per site"),
            StateKind::Basis if p.digits.iter().any(|&d| d >= self.site_dim()) => bad("digit outside the local dimension"),
            StateKind::Microcanonical if p.window_center.is_none() => bad("microcanonical states need window_center"),
            _ => check_grid(p.t0, p.t1, p.step),
        }
    }
}

fn check_grid(t0: f64, t1: f64, step: f64) -> Result<()> {
    if !(step > 0.0) || !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::Config(format!("bad time grid [{t0}, {t1}] step {step}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const LEVELS: &str = r#"
experiment = "levels"
symmetries = ["parity"]
[hamiltonian]
kind = "qubit"
sites = 6
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_toml(LEVELS).unwrap();
        assert_eq!(c.hamiltonian.sites, 6);
        assert_eq!(c.hamiltonian.hx, 1.05);
        assert_eq!(c.master_seed, 0);
        c.validate(ExperimentKind::Levels).unwrap();
        assert!(c.validate(ExperimentKind::Evolve).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{LEVELS}\nbogus = 1\n");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config(_))));
        let text = LEVELS.replace("sites = 6", "sites = 6\nspin = 2");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn empty_and_malformed() {
        assert!(matches!(ExperimentConfig::from_toml(""), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_toml("[hamiltonian"), Err(Error::Config(_))));
        let e = ExperimentConfig::from_toml("x = ").unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn evolve_validation() {
        let text = r#"
[hamiltonian]
kind = "qutrit"
sites = 4
a = 1.0
[evolve]
state = "product"
t1 = 10.0
observables = ["S(2)"]
"#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        // qutrit products need f
        assert!(c.validate(ExperimentKind::Evolve).is_err());
        let c = ExperimentConfig::from_toml(&text.replace("t1 = 10.0", "t1 = 10.0\nf = [0.5]")).unwrap();
        c.validate(ExperimentKind::Evolve).unwrap();
    }

    #[test]
    fn charge_symmetry_on_qubits_is_a_config_error() {
        let text = LEVELS.replace("[\"parity\"]", "[\"charge\"]");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        assert!(matches!(c.validate(ExperimentKind::Levels), Err(Error::Config(_))));
    }
}
