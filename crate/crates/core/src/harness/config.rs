//! Declarative run configuration (TOML). Unknown keys are errors.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::drive::{periodic_protocol, switch_on_protocol, DriveProtocol, KernelSpec, LinearTerm, Waveform};
use crate::error::{Error, Result};
use crate::fock::{Boundary, LatticeSpec, MAX_EXACT_SITES};
use crate::thermo::GibbsParams;

/// Largest lattice on which both paths are run side by side.
pub const MAX_BOTH_SITES: usize = 6;

/// Maximum group velocity of the unit-hopping band.
pub const HOP_VELOCITY: f64 = 2.0;

/// Fraction of the boundary-return time kept as the recurrence window.
pub const WINDOW_FRACTION: f64 = 0.8;

/// Phases sampled per period for the cycle distance.
pub const CYCLE_PHASES: usize = 8;

/// Minimum number of full periods a periodic quadratic run must contain.
pub const MIN_PERIODS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathChoice {
    Exact,
    Quadratic,
    Both,
}

impl PathChoice {
    pub fn runs_exact(self) -> bool {
        matches!(self, Self::Exact | Self::Both)
    }

    pub fn runs_quadratic(self) -> bool {
        matches!(self, Self::Quadratic | Self::Both)
    }
}

impl fmt::Display for PathChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Exact => "exact",
            Self::Quadratic => "quadratic",
            Self::Both => "both",
        })
    }
}

impl FromStr for PathChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "quadratic" => Ok(Self::Quadratic),
            "both" => Ok(Self::Both),
            other => Err(Error::Config(format!("unknown path `{other}` (expected exact, quadratic or both)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    SwitchOn,
    Periodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    #[default]
    Direct,
    Dyson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub sites: usize,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    pub local_region: Vec<usize>,
}

fn default_boundary() -> Boundary {
    Boundary::Dirichlet
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub protocol: ProtocolKind,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub t0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default = "default_waveform")]
    pub waveform: Waveform,
    pub kernels: Vec<KernelSpec>,
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_waveform() -> Waveform {
    Waveform::Sin
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub method: MethodKind,
    #[serde(default = "default_dyson_order")]
    pub dyson_order: usize,
}

fn default_tol() -> f64 {
    crate::propagator::DEFAULT_TOL
}

fn default_dyson_order() -> usize {
    8
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            method: MethodKind::Direct,
            dyson_order: default_dyson_order(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output grid step; defaults to 0.1, or `T/40` for periodic drives.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Defaults to the end of the recurrence window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    /// Probe pairs `[i, j]` inside the local region: `[i, i]` is `n_i`,
    /// otherwise `a_i* a_j + a_j* a_i`. Defaults to every pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<[usize; 2]>>,
    /// Write the final exact-path state in the binary checkpoint format.
    #[serde(default)]
    pub checkpoint: bool,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dt: None,
            t_end: None,
            directory: default_directory(),
            probes: None,
            checkpoint: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_path")]
    pub path: PathChoice,
    pub lattice: LatticeConfig,
    pub gibbs: GibbsParams,
    pub drive: DriveConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_path() -> PathChoice {
    PathChoice::Quadratic
}

/// Parameter a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Beta,
    Mu,
    Amplitude,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Beta => "beta",
            Self::Mu => "mu",
            Self::Amplitude => "amplitude",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(Self::Beta),
            "mu" => Ok(Self::Mu),
            "amplitude" => Ok(Self::Amplitude),
            other => Err(Error::Config(format!(
                "unknown sweep axis `{other}` (expected beta, mu or amplitude)"
            ))),
        }
    }
}

impl RunConfig {
    /// Parses and validates.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(self.lattice.sites, self.lattice.boundary, self.lattice.local_region.clone())
    }

    pub fn t0(&self) -> f64 {
        self.drive.t0
    }

    /// `t₀ + 0.8·L/v_max`: the last time before boundary reflections can
    /// return to the local region.
    pub fn window_end(&self) -> f64 {
        self.drive.t0 + WINDOW_FRACTION * self.lattice.sites as f64 / HOP_VELOCITY
    }

    pub fn dt(&self) -> f64 {
        match (self.output.dt, self.drive.protocol, self.drive.period) {
            (Some(dt), _, _) => dt,
            (None, ProtocolKind::Periodic, Some(t)) => t / 40.0,
            _ => 0.1,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.output.t_end.unwrap_or_else(|| self.window_end())
    }

    /// Output grid `t₀ + k·dt`, ending at `t_end` (which must be on the grid
    /// up to `10⁻⁹·dt`).
    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        let n = ((self.t_end() - self.t0()) / dt).round() as usize;
        (0..=n).map(|k| self.t0() + k as f64 * dt).collect()
    }

    /// Grid points per period for periodic drives.
    pub fn points_per_period(&self) -> Option<usize> {
        self.drive.period.map(|t| (t / self.dt()).round() as usize)
    }

    fn is_quadratic(&self) -> bool {
        self.drive.kernels.iter().all(|k| k.degree == 1)
    }

    /// Checks every cross-field constraint; all failures are `Error::Config`.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let l = self.lattice.sites;
        self.lattice().map_err(|e| Error::Config(format!("lattice: {e}")))?;
        self.gibbs.validate().map_err(|e| Error::Config(format!("gibbs: {e}")))?;
        if self.path.runs_exact() && l > MAX_EXACT_SITES {
            return Err(Error::LatticeTooLarge {
                requested: l,
                max: MAX_EXACT_SITES,
            });
        }
        if self.path == PathChoice::Both && l > MAX_BOTH_SITES {
            return bad(format!("path `both` needs at most {MAX_BOTH_SITES} sites, got {l}"));
        }
        if self.path.runs_quadratic() && !self.is_quadratic() {
            return bad("the quadratic path needs degree-1 kernels only".into());
        }
        if l > MAX_EXACT_SITES && !self.is_quadratic() {
            return bad(format!("non-quadratic kernels need at most {MAX_EXACT_SITES} sites"));
        }
        if !self.drive.amplitude.is_finite() || !self.drive.t0.is_finite() {
            return bad("drive amplitude and t0 must be finite".into());
        }
        let lattice = self.lattice()?;
        for k in &self.drive.kernels {
            k.validate(&lattice).map_err(|e| Error::Config(format!("kernel: {e}")))?;
        }
        if !(self.integrator.tol > 0.0 && self.integrator.tol.is_finite()) {
            return bad(format!("integrator tolerance must be positive, got {}", self.integrator.tol));
        }
        if self.integrator.method == MethodKind::Dyson && self.integrator.dyson_order == 0 {
            return bad("dyson_order must be at least 1".into());
        }
        let dt = self.dt();
        if !(dt > 0.0 && dt.is_finite()) {
            return bad(format!("output dt must be positive, got {dt}"));
        }
        let span = self.t_end() - self.t0();
        if !(span > 0.0) {
            return bad(format!("t_end {} must exceed t0 {}", self.t_end(), self.t0()));
        }
        let steps = span / dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return bad(format!("t_end - t0 = {span} is not a multiple of dt = {dt}"));
        }
        let window = self.window_end() - self.t0();
        match self.drive.protocol {
            ProtocolKind::SwitchOn => {
                let Some(tau) = self.drive.tau_r else {
                    return bad("switch-on protocol needs tau_r".into());
                };
                if !(tau > 0.0) {
                    return bad(format!("tau_r must be positive, got {tau}"));
                }
                if self.path.runs_quadratic() && window < 3.0 * tau {
                    return bad(format!(
                        "recurrence window {window} is shorter than 3 tau_r = {}; enlarge the lattice to at least {} sites",
                        3.0 * tau,
                        (3.0 * tau * HOP_VELOCITY / WINDOW_FRACTION).ceil()
                    ));
                }
            }
            ProtocolKind::Periodic => {
                let Some(period) = self.drive.period else {
                    return bad("periodic protocol needs period".into());
                };
                if !(period > 0.0) {
                    return bad(format!("period must be positive, got {period}"));
                }
                let per_phase = period / (CYCLE_PHASES as f64 * dt);
                if (per_phase - per_phase.round()).abs() > 1e-9 || per_phase.round() < 1.0 {
                    return bad(format!(
                        "period/{CYCLE_PHASES} = {} must be a multiple of dt = {dt}",
                        period / CYCLE_PHASES as f64
                    ));
                }
                if self.path.runs_quadratic() && window < MIN_PERIODS as f64 * period {
                    return bad(format!(
                        "only {:.2} periods fit the recurrence window {window}; at least {MIN_PERIODS} are needed, enlarge the lattice",
                        window / period
                    ));
                }
            }
        }
        Ok(())
    }

    /// `W_∞` (switch-on) or `W_base` (periodic), scaled by the amplitude.
    /// The Fock form is built only when `with_fock` is set.
    pub fn build_term(&self, with_fock: bool) -> Result<LinearTerm> {
        let lattice = self.lattice()?;
        let term = if with_fock {
            LinearTerm::from_kernels(self.drive.kernels.clone(), &lattice)?
        } else {
            LinearTerm::one_body_only(self.drive.kernels.clone(), &lattice)?
        };
        Ok(term.scale(self.drive.amplitude))
    }

    pub fn build_protocol(&self, with_fock: bool) -> Result<DriveProtocol> {
        let term = self.build_term(with_fock)?;
        match self.drive.protocol {
            ProtocolKind::SwitchOn => switch_on_protocol(term, self.drive.t0, self.drive.tau_r.unwrap_or(1.0)),
            ProtocolKind::Periodic => periodic_protocol(term, self.drive.t0, self.drive.period.unwrap_or(1.0), self.drive.waveform),
        }
    }

    /// Range of `λ(t)` for the built-in protocols.
    pub fn lambda_range(&self) -> (f64, f64) {
        match self.drive.protocol {
            ProtocolKind::SwitchOn => (0.0, 1.0),
            ProtocolKind::Periodic => (-1.0, 1.0),
        }
    }

    /// A copy with one parameter replaced.
    pub fn with_axis(&self, axis: SweepAxis, value: f64) -> Self {
        let mut cfg = self.clone();
        match axis {
            SweepAxis::Beta => cfg.gibbs.beta = value,
            SweepAxis::Mu => cfg.gibbs.mu = value,
            SweepAxis::Amplitude => cfg.drive.amplitude = value,
        }
        cfg
    }
}

/// Input of the smallness-norm utility: a lattice and a list of kernels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    pub lattice: LatticeConfig,
    pub kernels: Vec<KernelSpec>,
}

impl KernelFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let lattice = file.lattice()?;
        for k in &file.kernels {
            k.validate(&lattice).map_err(|e| Error::Config(format!("kernel: {e}")))?;
        }
        Ok(file)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn lattice(&self) -> Result<LatticeSpec> {
        LatticeSpec::new(self.lattice.sites, self.lattice.boundary, self.lattice.local_region.clone())
            .map_err(|e| Error::Config(format!("lattice: {e}")))
    }
}
