//! Perturbation families `λ ↦ W(λ)` and control paths `t ↦ λ(t)`.
//!
//! Built-in families are linear, `W(λ) = Σ_j λ_j V_j`, with each `V_j` known
//! as a Fock-space operator (exact path), a one-body matrix (quadratic path),
//! or both. Custom families supply their own builder and its λ-derivative.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, Ladder, LatticeSpec, Operator};
use crate::linalg::{self, c, CMatrix, C64};
use crate::quadratic::norm::{self as qnorm, SMALLNESS_THRESHOLD};

/// One monomial `w · a*_{c1}…a*_{cN} a_{d1}…a_{dN}` with global site labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelEntry {
    pub creators: Vec<usize>,
    pub annihilators: Vec<usize>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl KernelEntry {
    pub fn new(creators: Vec<usize>, annihilators: Vec<usize>, coefficient: C64) -> Self {
        Self {
            creators,
            annihilators,
            re: coefficient.re,
            im: coefficient.im,
        }
    }

    pub fn coefficient(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

/// Degree-`N` kernel `w^N` supported on the local region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub degree: usize,
    pub entries: Vec<KernelEntry>,
}

impl KernelSpec {
    /// Degree-1 kernel from a dense one-body matrix (only nonzero entries kept).
    pub fn one_body(w: &CMatrix) -> Self {
        let mut entries = Vec::new();
        for i in 0..w.nrows() {
            for j in 0..w.ncols() {
                if w[(i, j)] != linalg::ZERO {
                    entries.push(KernelEntry::new(vec![i], vec![j], w[(i, j)]));
                }
            }
        }
        Self { degree: 1, entries }
    }

    pub fn validate(&self, lattice: &LatticeSpec) -> Result<()> {
        if self.degree == 0 {
            return Err(Error::InvalidArgument("kernel degree must be at least 1".into()));
        }
        for e in &self.entries {
            if e.creators.len() != self.degree || e.annihilators.len() != self.degree {
                return Err(Error::InvalidArgument(format!(
                    "degree-{} kernel entry needs {} creators and annihilators",
                    self.degree, self.degree
                )));
            }
            if !(e.re.is_finite() && e.im.is_finite()) {
                return Err(Error::NonFinite("kernel coefficient".into()));
            }
            for &s in e.creators.iter().chain(&e.annihilators) {
                lattice.check_site(s)?;
                if !lattice.contains_local(s) {
                    return Err(Error::NotLocal(format!("kernel touches site {s} outside the local region")));
                }
            }
        }
        Ok(())
    }
}

/// `W` on `Fock(Λ₀)`, with Λ₀'s sites relabelled `0..|Λ₀|` in ascending order.
pub fn build_local_perturbation(kernels: &[KernelSpec], lattice: &LatticeSpec) -> Result<Operator> {
    let local = lattice.local_lattice();
    local.require_exact()?;
    let pos = |s: usize| lattice.local_region().binary_search(&s).expect("validated local site");
    let dim = local.fock_dim();
    let mut m = CMatrix::zeros(dim, dim);
    for k in kernels {
        k.validate(lattice)?;
        for e in &k.entries {
            let ops: Vec<Ladder> = e
                .creators
                .iter()
                .map(|&s| Ladder::Create(pos(s)))
                .chain(e.annihilators.iter().map(|&s| Ladder::Annihilate(pos(s))))
                .collect();
            let w = e.coefficient();
            for state in 0..dim {
                if let Some((target, sign)) = fock::apply_ladder(&ops, state) {
                    m[(target, state)] += w * sign;
                }
            }
        }
    }
    Operator::hermitian(m)
}

/// `W = Σ_N Σ w^N a*…a* a…a` on the full Fock space.
pub fn build_perturbation(kernels: &[KernelSpec], lattice: &LatticeSpec) -> Result<Operator> {
    lattice.require_exact()?;
    let local = build_local_perturbation(kernels, lattice)?;
    fock::embed_local(&local, lattice)
}

/// The `L×L` one-body matrix of a purely degree-1 kernel list.
pub fn one_body_kernel(kernels: &[KernelSpec], lattice: &LatticeSpec) -> Result<CMatrix> {
    let l = lattice.sites();
    let mut w = CMatrix::zeros(l, l);
    for k in kernels {
        if k.degree != 1 {
            return Err(Error::NotQuadratic(format!("degree-{} kernel", k.degree)));
        }
        k.validate(lattice)?;
        for e in &k.entries {
            w[(e.creators[0], e.annihilators[0])] += e.coefficient();
        }
    }
    let drift = linalg::hermiticity_defect(&w);
    if drift > fock::HERMITIAN_TOL {
        return Err(Error::NotHermitian(drift));
    }
    Ok(w)
}

/// Operator norm of the second quantization of a Hermitian one-body matrix:
/// the larger of the summed positive and summed negative eigenvalues.
pub fn second_quantized_norm(w: &CMatrix) -> f64 {
    let e = linalg::HermitianEigen::new(w);
    let pos: f64 = e.values.iter().filter(|&&x| x > 0.0).sum();
    let neg: f64 = e.values.iter().filter(|&&x| x < 0.0).sum();
    pos.max(-neg)
}

/// One generator `V_j` of a linear family, in whichever representations are
/// available.
#[derive(Clone, Debug)]
pub struct LinearTerm {
    fock: Option<Operator>,
    one_body: Option<CMatrix>,
    kernels: Option<Vec<KernelSpec>>,
}

impl LinearTerm {
    /// From kernels: the one-body form exists iff every kernel has degree 1;
    /// the Fock form exists iff the lattice is within the exact-path cap.
    pub fn from_kernels(kernels: Vec<KernelSpec>, lattice: &LatticeSpec) -> Result<Self> {
        for k in &kernels {
            k.validate(lattice)?;
        }
        let quadratic = kernels.iter().all(|k| k.degree == 1);
        let one_body = if quadratic {
            Some(one_body_kernel(&kernels, lattice)?)
        } else {
            None
        };
        let fock = if lattice.sites() <= fock::MAX_EXACT_SITES {
            Some(build_perturbation(&kernels, lattice)?)
        } else {
            // still certify Hermiticity of the induced local operator
            build_local_perturbation(&kernels, lattice)?;
            None
        };
        if fock.is_none() && one_body.is_none() {
            return Err(Error::LatticeTooLarge {
                requested: lattice.sites(),
                max: fock::MAX_EXACT_SITES,
            });
        }
        Ok(Self {
            fock,
            one_body,
            kernels: Some(kernels),
        })
    }

    /// From degree-1 kernels, skipping the Fock form (large-lattice runs that
    /// never touch the exact path).
    pub fn one_body_only(kernels: Vec<KernelSpec>, lattice: &LatticeSpec) -> Result<Self> {
        for k in &kernels {
            k.validate(lattice)?;
            if k.degree != 1 {
                return Err(Error::NotQuadratic(format!("kernel of degree {}", k.degree)));
            }
        }
        Ok(Self {
            fock: None,
            one_body: Some(one_body_kernel(&kernels, lattice)?),
            kernels: Some(kernels),
        })
    }

    /// From a raw Fock-space operator (test drives, non-quadratic probes).
    pub fn from_fock(op: Operator) -> Result<Self> {
        let op = op.certify()?;
        Ok(Self {
            fock: Some(op),
            one_body: None,
            kernels: None,
        })
    }

    /// From a one-body matrix; the Fock form is built when the lattice allows.
    pub fn from_one_body(w: CMatrix, lattice: &LatticeSpec) -> Result<Self> {
        Self::from_kernels(vec![KernelSpec::one_body(&w)], lattice)
    }

    pub fn fock(&self) -> Option<&Operator> {
        self.fock.as_ref()
    }

    pub fn one_body(&self) -> Option<&CMatrix> {
        self.one_body.as_ref()
    }

    pub fn kernels(&self) -> Option<&[KernelSpec]> {
        self.kernels.as_deref()
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            fock: self.fock.as_ref().map(|f| f.scale(a)),
            one_body: self.one_body.as_ref().map(|w| w * c(a)),
            kernels: self.kernels.as_ref().map(|ks| {
                ks.iter()
                    .map(|k| KernelSpec {
                        degree: k.degree,
                        entries: k
                            .entries
                            .iter()
                            .map(|e| KernelEntry::new(e.creators.clone(), e.annihilators.clone(), e.coefficient() * a))
                            .collect(),
                    })
                    .collect()
            }),
        }
    }

    /// Operator norm of `V_j` on Fock space.
    pub fn norm(&self) -> f64 {
        match (&self.fock, &self.one_body) {
            (Some(f), _) => linalg::spectral_norm_hermitian(f.matrix()),
            (None, Some(w)) => second_quantized_norm(w),
            (None, None) => 0.0,
        }
    }
}

/// Waveform of a periodic protocol, normalized to amplitude one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Waveform {
    Sin,
    SquareSmoothed,
}

/// Smoothing width of the square waveform, as a fraction of the period.
pub const SQUARE_RAMP_FRACTION: f64 = 1.0 / 20.0;

type PathFn = Arc<dyn Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync>;
type FockBuilder = Arc<dyn Fn(&[f64]) -> Result<Operator> + Send + Sync>;
type FockDerivative = Arc<dyn Fn(&[f64]) -> Result<Vec<Operator>> + Send + Sync>;
type OneBodyBuilder = Arc<dyn Fn(&[f64]) -> Result<CMatrix> + Send + Sync>;
type OneBodyDerivative = Arc<dyn Fn(&[f64]) -> Result<Vec<CMatrix>> + Send + Sync>;

#[derive(Clone)]
enum ControlPath {
    SwitchOn { tau_r: f64 },
    Periodic { period: f64, waveform: Waveform },
    Custom { k: usize, f: PathFn },
}

#[derive(Clone)]
enum Family {
    Linear(Vec<LinearTerm>),
    Custom {
        fock: Option<(FockBuilder, FockDerivative)>,
        one_body: Option<(OneBodyBuilder, OneBodyDerivative)>,
    },
}

/// Protocol class, as reported by [`certify_drive`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Classification {
    SwitchOn { tau_r: f64 },
    Periodic { period: f64 },
    Custom,
}

/// A control path together with the family it drives.
#[derive(Clone)]
pub struct DriveProtocol {
    t0: f64,
    path: ControlPath,
    family: Family,
}

impl fmt::Debug for DriveProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriveProtocol")
            .field("t0", &self.t0)
            .field("k", &self.k())
            .field("classification", &self.classification())
            .finish()
    }
}

/// `W_t = (1 − e^{−(t−t₀)/τ_r}) W_∞` for `t ≥ t₀`.
pub fn switch_on_protocol(w_inf: LinearTerm, t0: f64, tau_r: f64) -> Result<DriveProtocol> {
    if !(tau_r > 0.0 && tau_r.is_finite()) {
        return Err(Error::InvalidArgument(format!("ramp time must be positive, got {tau_r}")));
    }
    Ok(DriveProtocol {
        t0,
        path: ControlPath::SwitchOn { tau_r },
        family: Family::Linear(vec![w_inf]),
    })
}

/// `W_t = λ(t) W_base` with a unit-amplitude `T`-periodic waveform starting at
/// phase zero at `t₀` (so `λ(t₀) = 0`).
pub fn periodic_protocol(w_base: LinearTerm, t0: f64, period: f64, waveform: Waveform) -> Result<DriveProtocol> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
    }
    Ok(DriveProtocol {
        t0,
        path: ControlPath::Periodic { period, waveform },
        family: Family::Linear(vec![w_base]),
    })
}

/// Linear family `Σ λ_j V_j` along an arbitrary path returning `(λ, λ̇)`.
pub fn linear_protocol<F>(terms: Vec<LinearTerm>, t0: f64, path: F) -> Result<DriveProtocol>
where
    F: Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync + 'static,
{
    let k = terms.len();
    let (l0, d0) = path(t0);
    if l0.len() != k || d0.len() != k {
        return Err(Error::ControlMismatch {
            expected: k,
            found: l0.len(),
        });
    }
    Ok(DriveProtocol {
        t0,
        path: ControlPath::Custom { k, f: Arc::new(path) },
        family: Family::Linear(terms),
    })
}

/// Builder for nonlinear families; a builder must come with its derivative.
pub struct CustomDrive {
    t0: f64,
    k: usize,
    path: PathFn,
    fock: Option<(FockBuilder, FockDerivative)>,
    one_body: Option<(OneBodyBuilder, OneBodyDerivative)>,
}

impl CustomDrive {
    pub fn new<F>(t0: f64, k: usize, path: F) -> Self
    where
        F: Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync + 'static,
    {
        Self {
            t0,
            k,
            path: Arc::new(path),
            fock: None,
            one_body: None,
        }
    }

    pub fn fock<B, D>(mut self, builder: B, d_builder: D) -> Self
    where
        B: Fn(&[f64]) -> Result<Operator> + Send + Sync + 'static,
        D: Fn(&[f64]) -> Result<Vec<Operator>> + Send + Sync + 'static,
    {
        self.fock = Some((Arc::new(builder), Arc::new(d_builder)));
        self
    }

    pub fn one_body<B, D>(mut self, builder: B, d_builder: D) -> Self
    where
        B: Fn(&[f64]) -> Result<CMatrix> + Send + Sync + 'static,
        D: Fn(&[f64]) -> Result<Vec<CMatrix>> + Send + Sync + 'static,
    {
        self.one_body = Some((Arc::new(builder), Arc::new(d_builder)));
        self
    }

    pub fn build(self) -> Result<DriveProtocol> {
        if self.fock.is_none() && self.one_body.is_none() {
            return Err(Error::InvalidArgument("custom drive needs at least one builder".into()));
        }
        let (l0, _) = (self.path)(self.t0);
        if l0.len() != self.k {
            return Err(Error::ControlMismatch {
                expected: self.k,
                found: l0.len(),
            });
        }
        Ok(DriveProtocol {
            t0: self.t0,
            path: ControlPath::Custom { k: self.k, f: self.path },
            family: Family::Custom {
                fock: self.fock,
                one_body: self.one_body,
            },
        })
    }
}

fn smoothstep(u: f64) -> (f64, f64) {
    let u = u.clamp(0.0, 1.0);
    (u * u * (3.0 - 2.0 * u), 6.0 * u * (1.0 - u))
}

/// Wraps a phase into `[−1/2, 1/2)`.
fn centred(phase: f64) -> f64 {
    (phase + 0.5).rem_euclid(1.0) - 0.5
}

/// Unit square wave with C¹ transitions of width `w` (in phase units)
/// centred at phases 0 (rising) and 1/2 (falling). Returns value and
/// derivative with respect to phase.
fn smoothed_square(phase: f64, w: f64) -> (f64, f64) {
    let d0 = centred(phase);
    let d1 = centred(phase - 0.5);
    if d0.abs() <= w / 2.0 {
        let (s, ds) = smoothstep(d0 / w + 0.5);
        (2.0 * s - 1.0, 2.0 * ds / w)
    } else if d1.abs() <= w / 2.0 {
        let (s, ds) = smoothstep(d1 / w + 0.5);
        (1.0 - 2.0 * s, -2.0 * ds / w)
    } else if d0 > 0.0 {
        (1.0, 0.0)
    } else {
        (-1.0, 0.0)
    }
}

impl DriveProtocol {
    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Control dimension `k`.
    pub fn k(&self) -> usize {
        match (&self.path, &self.family) {
            (ControlPath::Custom { k, .. }, _) => *k,
            (_, Family::Linear(terms)) => terms.len(),
            _ => 1,
        }
    }

    pub fn classification(&self) -> Classification {
        match self.path {
            ControlPath::SwitchOn { tau_r } => Classification::SwitchOn { tau_r },
            ControlPath::Periodic { period, .. } => Classification::Periodic { period },
            ControlPath::Custom { .. } => Classification::Custom,
        }
    }

    pub fn period(&self) -> Option<f64> {
        match self.path {
            ControlPath::Periodic { period, .. } => Some(period),
            _ => None,
        }
    }

    /// `(λ(t), λ̇(t))`. Before `t₀` the path is frozen at `λ(t₀)`.
    pub fn control(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let before = t < self.t0;
        let t = if before { self.t0 } else { t };
        let (l, d) = match &self.path {
            ControlPath::SwitchOn { tau_r } => {
                let e = (-(t - self.t0) / tau_r).exp();
                // right derivative at t₀; zero before (see `before`)
                (vec![1.0 - e], vec![e / tau_r])
            }
            ControlPath::Periodic { period, waveform } => {
                let phase = ((t - self.t0) / period).rem_euclid(1.0);
                match waveform {
                    Waveform::Sin => {
                        let w = 2.0 * std::f64::consts::PI / period;
                        let arg = 2.0 * std::f64::consts::PI * phase;
                        (vec![arg.sin()], vec![w * arg.cos()])
                    }
                    Waveform::SquareSmoothed => {
                        let (v, dv) = smoothed_square(phase, SQUARE_RAMP_FRACTION);
                        (vec![v], vec![dv / period])
                    }
                }
            }
            ControlPath::Custom { f, .. } => f(t),
        };
        if before {
            let k = d.len();
            (l, vec![0.0; k])
        } else {
            (l, d)
        }
    }

    pub fn lambda(&self, t: f64) -> Vec<f64> {
        self.control(t).0
    }

    pub fn lambda_dot(&self, t: f64) -> Vec<f64> {
        self.control(t).1
    }

    /// `t = t₀ + n T + τ` with `τ ∈ [0, T)`.
    pub fn decompose_time(&self, t: f64) -> Option<(i64, f64)> {
        let period = self.period()?;
        Some(decompose_time(t - self.t0, period))
    }

    fn check_k(&self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.k() {
            return Err(Error::ControlMismatch {
                expected: self.k(),
                found: lambda.len(),
            });
        }
        Ok(())
    }

    pub fn has_fock(&self) -> bool {
        match &self.family {
            Family::Linear(terms) => terms.iter().all(|t| t.fock.is_some()),
            Family::Custom { fock, .. } => fock.is_some(),
        }
    }

    /// True when `W(λ)` is available as a one-body matrix.
    pub fn is_quadratic(&self) -> bool {
        match &self.family {
            Family::Linear(terms) => terms.iter().all(|t| t.one_body.is_some()),
            Family::Custom { one_body, .. } => one_body.is_some(),
        }
    }

    pub fn linear_terms(&self) -> Option<&[LinearTerm]> {
        match &self.family {
            Family::Linear(t) => Some(t),
            Family::Custom { .. } => None,
        }
    }

    /// `W(λ)` on Fock space.
    pub fn w_fock(&self, lambda: &[f64]) -> Result<Operator> {
        self.check_k(lambda)?;
        match &self.family {
            Family::Linear(terms) => {
                let mut acc: Option<CMatrix> = None;
                for (t, &l) in terms.iter().zip(lambda) {
                    let f = t
                        .fock
                        .as_ref()
                        .ok_or_else(|| Error::Unsupported("term has no Fock-space form".into()))?;
                    let scaled = f.matrix() * c(l);
                    acc = Some(match acc {
                        None => scaled,
                        Some(a) => a + scaled,
                    });
                }
                Operator::hermitian(acc.ok_or_else(|| Error::InvalidArgument("empty family".into()))?)
            }
            Family::Custom { fock, .. } => {
                let (b, _) = fock
                    .as_ref()
                    .ok_or_else(|| Error::Unsupported("drive has no Fock-space builder".into()))?;
                b(lambda)?.certify()
            }
        }
    }

    /// `[∂W/∂λ_j]` on Fock space.
    pub fn dw_fock(&self, lambda: &[f64]) -> Result<Vec<Operator>> {
        self.check_k(lambda)?;
        match &self.family {
            Family::Linear(terms) => terms
                .iter()
                .map(|t| {
                    t.fock
                        .clone()
                        .ok_or_else(|| Error::Unsupported("term has no Fock-space form".into()))
                })
                .collect(),
            Family::Custom { fock, .. } => {
                let (_, d) = fock
                    .as_ref()
                    .ok_or_else(|| Error::Unsupported("drive has no Fock-space builder".into()))?;
                let ds = d(lambda)?;
                if ds.len() != self.k() {
                    return Err(Error::ControlMismatch {
                        expected: self.k(),
                        found: ds.len(),
                    });
                }
                ds.into_iter().map(Operator::certify).collect()
            }
        }
    }

    /// `W(λ)` as a one-body matrix; non-quadratic drives are rejected.
    pub fn w_one_body(&self, lambda: &[f64]) -> Result<CMatrix> {
        self.check_k(lambda)?;
        match &self.family {
            Family::Linear(terms) => {
                let mut acc: Option<CMatrix> = None;
                for (t, &l) in terms.iter().zip(lambda) {
                    let w = t
                        .one_body
                        .as_ref()
                        .ok_or_else(|| Error::NotQuadratic("term has degree above one".into()))?;
                    let scaled = w * c(l);
                    acc = Some(match acc {
                        None => scaled,
                        Some(a) => a + scaled,
                    });
                }
                acc.ok_or_else(|| Error::InvalidArgument("empty family".into()))
            }
            Family::Custom { one_body, .. } => {
                let (b, _) = one_body
                    .as_ref()
                    .ok_or_else(|| Error::NotQuadratic("custom drive has no one-body builder".into()))?;
                b(lambda)
            }
        }
    }

    pub fn dw_one_body(&self, lambda: &[f64]) -> Result<Vec<CMatrix>> {
        self.check_k(lambda)?;
        match &self.family {
            Family::Linear(terms) => terms
                .iter()
                .map(|t| {
                    t.one_body
                        .clone()
                        .ok_or_else(|| Error::NotQuadratic("term has degree above one".into()))
                })
                .collect(),
            Family::Custom { one_body, .. } => {
                let (_, d) = one_body
                    .as_ref()
                    .ok_or_else(|| Error::NotQuadratic("custom drive has no one-body builder".into()))?;
                let ds = d(lambda)?;
                if ds.len() != self.k() {
                    return Err(Error::ControlMismatch {
                        expected: self.k(),
                        found: ds.len(),
                    });
                }
                Ok(ds)
            }
        }
    }

    /// `W_t`: zero before `t₀`.
    pub fn w_fock_at(&self, t: f64, dim: usize) -> Result<Operator> {
        if t < self.t0 {
            return Ok(Operator::zeros(dim));
        }
        self.w_fock(&self.lambda(t))
    }

    pub fn w_one_body_at(&self, t: f64, sites: usize) -> Result<CMatrix> {
        if t < self.t0 {
            return Ok(CMatrix::zeros(sites, sites));
        }
        self.w_one_body(&self.lambda(t))
    }
}

/// `x = n T + τ` with `τ ∈ [0, T)`.
pub fn decompose_time(x: f64, period: f64) -> (i64, f64) {
    let mut n = (x / period).floor() as i64;
    let mut tau = x - n as f64 * period;
    if tau < 0.0 {
        n -= 1;
        tau = x - n as f64 * period;
    } else if tau >= period {
        n += 1;
        tau = x - n as f64 * period;
    }
    (n, tau)
}

/// Smallness-norm verdict for a quadratic drive.
#[derive(Clone, Debug, Serialize)]
pub struct SmallnessVerdict {
    pub norm: f64,
    pub richardson_estimate: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// What [`certify_drive`] found.
#[derive(Clone, Debug, Serialize)]
pub struct DriveReport {
    pub classification: Classification,
    pub locality_defect: Option<f64>,
    pub local: bool,
    pub gauge_defect: Option<f64>,
    pub gauge_invariant: bool,
    pub charge_conserving: bool,
    pub sup_norm: f64,
    pub integrability_constant: Option<f64>,
    pub period: Option<f64>,
    pub smallness: Option<SmallnessVerdict>,
    pub failures: Vec<String>,
}

const CERTIFY_TOL: f64 = 1e-10;

/// Locality, gauge invariance, size and (for quadratic drives) smallness.
///
/// `horizon` bounds the time sampling used for custom paths.
pub fn certify_drive(p: &DriveProtocol, lattice: &LatticeSpec, horizon: f64) -> DriveReport {
    let mut failures = Vec::new();
    let mut locality_defect = None;
    let mut gauge_defect = None;
    let mut gauge_invariant = true;
    let mut local = true;

    let generators: Vec<Operator> = if p.has_fock() {
        p.dw_fock(&p.lambda(p.t0)).unwrap_or_default()
    } else {
        Vec::new()
    };
    for g in &generators {
        match fock::locality_defect(g, lattice) {
            Ok(d) => {
                locality_defect = Some(locality_defect.unwrap_or(0.0f64).max(d));
                local &= d <= CERTIFY_TOL;
            }
            Err(e) => failures.push(format!("locality check failed: {e}")),
        }
        let gd = fock::charge_commutator_norm(g);
        gauge_defect = Some(gauge_defect.unwrap_or(0.0f64).max(gd));
        gauge_invariant &= gd <= CERTIFY_TOL;
    }
    if generators.is_empty() {
        // quadratic-only: kernels are validated local; one-body terms conserve N
        if let Some(terms) = p.linear_terms() {
            for t in terms {
                if let Some(ks) = t.kernels() {
                    for k in ks {
                        if let Err(e) = k.validate(lattice) {
                            local = false;
                            failures.push(e.to_string());
                        }
                    }
                }
            }
            locality_defect = Some(if local { 0.0 } else { f64::INFINITY });
            gauge_defect = Some(0.0);
        }
    }
    if !local {
        failures.push("drive is not supported on the local region".into());
    }

    let (sup_lambda, generator_norms) = sup_profile(p, horizon);
    let sup_norm = match p.linear_terms() {
        Some(terms) if terms.len() == 1 => sup_lambda[0] * terms[0].norm(),
        _ => generator_norms,
    };

    let integrability_constant = match p.path {
        ControlPath::SwitchOn { tau_r } => p.linear_terms().map(|t| tau_r * t[0].norm()),
        _ => None,
    };

    let smallness = match p.linear_terms() {
        Some(terms) if p.is_quadratic() => {
            let mut total = 0.0;
            let mut rich = 0.0;
            let mut ok = true;
            for (t, sup) in terms.iter().zip(&sup_lambda) {
                match t.kernels().map(|ks| qnorm::drive_norm(ks, lattice)) {
                    Some(Ok(est)) => {
                        total += sup * est.value;
                        rich += sup * est.richardson_estimate;
                    }
                    Some(Err(e)) => {
                        ok = false;
                        failures.push(format!("smallness norm: {e}"));
                    }
                    None => ok = false,
                }
            }
            ok.then_some(SmallnessVerdict {
                norm: total,
                richardson_estimate: rich,
                threshold: SMALLNESS_THRESHOLD,
                pass: total < SMALLNESS_THRESHOLD,
            })
        }
        _ => None,
    };

    DriveReport {
        classification: p.classification(),
        locality_defect,
        local,
        gauge_defect,
        gauge_invariant,
        charge_conserving: gauge_invariant,
        sup_norm,
        integrability_constant,
        period: p.period(),
        smallness,
        failures,
    }
}

/// Per-component `sup_t |λ_j(t)|` and, for non-linear or multi-term
/// families, a sampled `sup_t ‖W_t‖`.
fn sup_profile(p: &DriveProtocol, horizon: f64) -> (Vec<f64>, f64) {
    let k = p.k();
    match p.path {
        ControlPath::SwitchOn { .. } => (vec![1.0; k], 0.0),
        ControlPath::Periodic { .. } => (vec![1.0; k], 0.0),
        ControlPath::Custom { .. } => {
            let samples = 256;
            let mut sup = vec![0.0f64; k];
            let mut wsup = 0.0f64;
            for n in 0..=samples {
                let t = p.t0 + horizon * n as f64 / samples as f64;
                let l = p.lambda(t);
                for (s, v) in sup.iter_mut().zip(&l) {
                    *s = s.max(v.abs());
                }
                let norm = if p.has_fock() {
                    p.w_fock(&l)
                        .map(|w| linalg::spectral_norm_hermitian(w.matrix()))
                        .unwrap_or(f64::NAN)
                } else {
                    p.w_one_body(&l).map(|w| second_quantized_norm(&w)).unwrap_or(f64::NAN)
                };
                wsup = wsup.max(norm);
            }
            (sup, wsup)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{annihilation_op, creation_op, Boundary};

    fn lattice(l: usize, region: Vec<usize>) -> LatticeSpec {
        LatticeSpec::new(l, Boundary::Dirichlet, region).unwrap()
    }

    fn n_kernel(site: usize) -> KernelSpec {
        KernelSpec {
            degree: 1,
            entries: vec![KernelEntry::new(vec![site], vec![site], c(1.0))],
        }
    }

    #[test]
    fn degree_one_delta_kernel_is_site_number() {
        let spec = lattice(3, vec![0, 1]);
        let w = build_perturbation(&[n_kernel(0)], &spec).unwrap();
        let n0 = &creation_op(&spec, 0).unwrap() * &annihilation_op(&spec, 0).unwrap();
        assert!(linalg::max_abs_diff(w.matrix(), n0.matrix()) <= 1e-15);
        assert!(fock::is_gauge_invariant(&w, 1e-12));
    }

    #[test]
    fn degree_two_kernel_matches_hand_assembly() {
        let spec = lattice(3, vec![0, 1]);
        let k = KernelSpec {
            degree: 2,
            entries: vec![KernelEntry::new(vec![0, 1], vec![1, 0], c(1.0))],
        };
        let w = build_perturbation(&[k], &spec).unwrap();
        let ops: Vec<Operator> = vec![
            creation_op(&spec, 0).unwrap(),
            creation_op(&spec, 1).unwrap(),
            annihilation_op(&spec, 1).unwrap(),
            annihilation_op(&spec, 0).unwrap(),
        ];
        let hand = ops[1..].iter().fold(ops[0].clone(), |acc, o| &acc * o);
        assert!(linalg::max_abs_diff(w.matrix(), hand.matrix()) <= 1e-12);
        assert!(fock::is_gauge_invariant(&w, 1e-12));
    }

    #[test]
    fn kernels_outside_region_or_non_hermitian_are_rejected() {
        let spec = lattice(4, vec![1, 2]);
        assert!(matches!(build_perturbation(&[n_kernel(0)], &spec), Err(Error::NotLocal(_))));
        let k = KernelSpec {
            degree: 1,
            entries: vec![KernelEntry::new(vec![1], vec![2], c(1.0))],
        };
        assert!(matches!(
            build_perturbation(std::slice::from_ref(&k), &spec),
            Err(Error::NotHermitian(_))
        ));
        assert!(matches!(one_body_kernel(&[k], &spec), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn second_quantized_norm_matches_fock() {
        let spec = lattice(4, vec![0, 1, 2]);
        let mut w = CMatrix::zeros(4, 4);
        w[(0, 0)] = c(0.3);
        w[(1, 2)] = C64::new(0.2, 0.1);
        w[(2, 1)] = C64::new(0.2, -0.1);
        w[(2, 2)] = c(-0.5);
        let term = LinearTerm::from_one_body(w.clone(), &spec).unwrap();
        let fock_norm = linalg::spectral_norm_hermitian(term.fock().unwrap().matrix());
        assert!((second_quantized_norm(&w) - fock_norm).abs() < 1e-12);
    }

    #[test]
    fn switch_on_ramp_closed_forms() {
        let spec = lattice(3, vec![1]);
        let term = LinearTerm::from_kernels(vec![n_kernel(1)], &spec).unwrap().scale(0.4);
        let p = switch_on_protocol(term, 1.0, 2.0).unwrap();
        assert_eq!(p.lambda(1.0), vec![0.0]);
        assert_eq!(p.lambda(0.3), vec![0.0]);
        assert_eq!(p.lambda_dot(0.5), vec![0.0]);
        let t = 1.0 + 2.0 * 100f64.ln();
        assert!((1.0 - p.lambda(t)[0] - 0.01).abs() < 1e-14);
        let report = certify_drive(&p, &spec, 10.0);
        assert!((report.integrability_constant.unwrap() - 2.0 * 0.4).abs() < 1e-10);
        assert!(report.local && report.gauge_invariant);
        assert!((report.sup_norm - 0.4).abs() < 1e-12);
    }

    #[test]
    fn periodic_waveforms() {
        let spec = lattice(3, vec![1]);
        let term = LinearTerm::from_kernels(vec![n_kernel(1)], &spec).unwrap();
        let sin = periodic_protocol(term.clone(), 0.0, 2.5, Waveform::Sin).unwrap();
        let w = 2.0 * std::f64::consts::PI / 2.5;
        for &t in &[0.1, 0.7, 1.9, 3.3] {
            assert!((sin.lambda_dot(t)[0] - w * (w * t).cos()).abs() < 1e-12);
        }
        let sq = periodic_protocol(term, 0.0, 2.0, Waveform::SquareSmoothed).unwrap();
        assert_eq!(sq.lambda(0.0), vec![0.0]);
        assert_eq!(sq.lambda(0.5), vec![1.0]);
        assert_eq!(sq.lambda(1.5), vec![-1.0]);
        assert!((sq.lambda(1.0)[0]).abs() < 1e-12);
        // derivative against finite differences inside a ramp
        let h = 1e-6;
        let t = 0.02;
        let fd = (sq.lambda(t + h)[0] - sq.lambda(t - h)[0]) / (2.0 * h);
        assert!((fd - sq.lambda_dot(t)[0]).abs() < 1e-5);
    }

    #[test]
    fn time_decomposition_reconstructs() {
        for &x in &[0.0, 0.3, 2.0, 7.99, 13.0, 1e3 + 0.1] {
            let (n, tau) = decompose_time(x, 2.0);
            assert!((0.0..2.0).contains(&tau));
            assert_eq!(n as f64 * 2.0 + tau, x);
        }
    }

    #[test]
    fn non_gauge_invariant_drive_is_flagged() {
        let spec = lattice(2, vec![0]);
        let a = annihilation_op(&spec, 0).unwrap();
        let probe = &a + &a.adjoint();
        let term = LinearTerm::from_fock(probe).unwrap();
        let p = switch_on_protocol(term, 0.0, 1.0).unwrap();
        let r = certify_drive(&p, &spec, 5.0);
        assert!(!r.gauge_invariant && !r.charge_conserving);
        assert!(r.local);
        assert!(r.smallness.is_none());
    }

    #[test]
    fn custom_family_requires_matching_dimension() {
        let spec = lattice(2, vec![0]);
        let n0 = build_perturbation(&[n_kernel(0)], &spec).unwrap();
        let n0b = n0.clone();
        let p = CustomDrive::new(0.0, 1, |t| (vec![t * t], vec![2.0 * t]))
            .fock(move |l| Ok(n0.scale(l[0] * l[0])), move |l| Ok(vec![n0b.scale(2.0 * l[0])]))
            .build()
            .unwrap();
        assert!(matches!(p.w_fock(&[1.0, 2.0]), Err(Error::ControlMismatch { .. })));
        let h = 1e-4;
        let l = 0.7;
        let fd = (p.w_fock(&[l + h]).unwrap().matrix() - p.w_fock(&[l - h]).unwrap().matrix()) / c(2.0 * h);
        assert!(linalg::max_abs_diff(&fd, p.dw_fock(&[l]).unwrap()[0].matrix()) < 1e-8);
        assert!(matches!(p.w_one_body(&[l]), Err(Error::NotQuadratic(_))));
    }
}
