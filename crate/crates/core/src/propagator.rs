//! Time evolution: direct midpoint-exponential integration, the truncated
//! Dyson series in the interaction picture, Heisenberg-picture maps and
//! finite-time Møller approximants.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::drive::DriveProtocol;
use crate::error::{Error, Result};
use crate::fock::{self, LatticeSpec, Operator};
use crate::linalg::{self, c, BlockEigen, CMatrix, HermitianEigen, C64, I, ZERO};

/// Default local error tolerance, per unit time.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Dyson remainder bounds above this raise a warning.
pub const DYSON_WARN_BOUND: f64 = 0.5;

/// Step differences below this are floating-point noise; the acceptance
/// test never asks for less.
pub const ROUNDOFF_FLOOR: f64 = 1e-13;

/// Locality tolerance for drive generators.
const LOCALITY_TOL: f64 = 1e-10;

/// `H_t = H₀ + W(λ(t))`, with `H_t = H₀` before the drive's `t₀`.
#[derive(Clone, Debug)]
pub struct TimeDependentHamiltonian {
    h0: Operator,
    drive: Option<DriveProtocol>,
}

impl TimeDependentHamiltonian {
    /// Checks dimensions and that every drive generator lives on `Λ₀`.
    pub fn new(h0: Operator, drive: DriveProtocol, lattice: &LatticeSpec) -> Result<Self> {
        lattice.require_exact()?;
        h0.check_dim(lattice.fock_dim())?;
        if !h0.is_hermitian() {
            return Err(Error::NotHermitian(linalg::hermiticity_defect(h0.matrix())));
        }
        let lambda0 = drive.lambda(drive.t0());
        for g in drive.dw_fock(&lambda0)? {
            g.check_dim(h0.dim())?;
            let defect = fock::locality_defect(&g, lattice)?;
            if defect > LOCALITY_TOL {
                return Err(Error::NotLocal(format!("drive generator fails locality by {defect:.3e}")));
            }
        }
        drive.w_fock(&lambda0)?.check_dim(h0.dim())?;
        Ok(Self { h0, drive: Some(drive) })
    }

    /// Autonomous Hamiltonian `H₀`.
    pub fn autonomous(h0: Operator) -> Self {
        Self { h0, drive: None }
    }

    pub fn dim(&self) -> usize {
        self.h0.dim()
    }

    pub fn h0(&self) -> &Operator {
        &self.h0
    }

    pub fn drive(&self) -> Option<&DriveProtocol> {
        self.drive.as_ref()
    }

    pub fn t0(&self) -> Option<f64> {
        self.drive.as_ref().map(DriveProtocol::t0)
    }

    /// `W_t`.
    pub fn w_at(&self, t: f64) -> Result<Operator> {
        match &self.drive {
            Some(d) => d.w_fock_at(t, self.dim()),
            None => Ok(Operator::zeros(self.dim())),
        }
    }

    /// `H_t` as a matrix.
    pub fn at(&self, t: f64) -> Result<CMatrix> {
        match &self.drive {
            Some(d) if t >= d.t0() => Ok(self.h0.matrix() + d.w_fock(&d.lambda(t))?.matrix()),
            _ => Ok(self.h0.matrix().clone()),
        }
    }

    /// `H_t` as a certified operator.
    pub fn operator_at(&self, t: f64) -> Result<Operator> {
        Operator::hermitian(self.at(t)?)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.t0().into_iter().collect()
    }
}

/// How a propagator was computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    DirectIntegration,
    Dyson(usize),
}

/// Which picture `U` is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Picture {
    Schrodinger,
    Interaction,
}

/// `U(t, s)` with its provenance and an error estimate.
#[derive(Clone, Debug)]
pub struct Propagator {
    u: CMatrix,
    s: f64,
    t: f64,
    method: Method,
    picture: Picture,
    est_error: f64,
    warning: Option<String>,
}

impl Propagator {
    /// Wraps an externally obtained unitary (e.g. from a checkpoint).
    pub fn from_parts(u: CMatrix, s: f64, t: f64, method: Method, picture: Picture, est_error: f64) -> Self {
        Self {
            u,
            s,
            t,
            method,
            picture,
            est_error,
            warning: None,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.u
    }

    pub fn into_matrix(self) -> CMatrix {
        self.u
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn picture(&self) -> Picture {
        self.picture
    }

    pub fn est_error(&self) -> f64 {
        self.est_error
    }

    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(&self.u)
    }

    /// `U(t,u) U(u,s)`; the caller supplies `self = U(t,u)`.
    pub fn compose(&self, earlier: &Propagator) -> Result<Propagator> {
        if self.s != earlier.t || self.picture != earlier.picture {
            return Err(Error::EndpointMismatch(format!(
                "cannot compose U({}, {}) after U({}, {})",
                self.t, self.s, earlier.t, earlier.s
            )));
        }
        Ok(Propagator {
            u: &self.u * &earlier.u,
            s: earlier.s,
            t: self.t,
            method: self.method,
            picture: self.picture,
            est_error: self.est_error + earlier.est_error,
            warning: self.warning.clone().or_else(|| earlier.warning.clone()),
        })
    }

    /// `U(s, t) = U(t, s)†`.
    pub fn inverse(&self) -> Propagator {
        Propagator {
            u: self.u.adjoint(),
            s: self.t,
            t: self.s,
            ..self.clone()
        }
    }

    /// Overwrites the unitary; used for fault-injection tests.
    pub fn corrupt(&mut self, u: CMatrix) {
        self.u = u;
    }
}

/// Adaptive midpoint-exponential stepper.
///
/// A step of size `dt` from `t` applies `e^{−i dt H(t + dt/2)}`. Its error
/// is estimated by comparing with two half steps; the step is accepted when
/// that difference is at most `tol·dt`, and the two-half-step result is kept.
#[derive(Clone, Debug)]
pub struct MidpointIntegrator {
    tol: f64,
    dt: f64,
    pub steps: usize,
    pub rejected: usize,
}

impl MidpointIntegrator {
    pub fn new(tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        Ok(Self {
            tol,
            dt: 0.0,
            steps: 0,
            rejected: 0,
        })
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// `U(t, s)` for `s ≤ t` and the accumulated local error estimate.
    pub fn advance<F>(&mut self, generator: &F, s: f64, t: f64) -> Result<(CMatrix, f64)>
    where
        F: Fn(f64) -> Result<CMatrix>,
    {
        debug_assert!(t >= s);
        let dim = generator(s)?.nrows();
        let mut u = linalg::identity(dim);
        let mut err_total = 0.0;
        let mut now = s;
        if self.dt <= 0.0 {
            self.dt = (t - s).min(0.1);
        }
        while now < t {
            let remaining = t - now;
            let mut dt = self.dt.min(remaining);
            // avoid a sliver at the end
            if remaining - dt < 1e-3 * dt {
                dt = remaining;
            }
            let step = |a: f64, h: f64| -> Result<CMatrix> {
                let hm = generator(a + 0.5 * h)?;
                // particle-number sectors when the generator conserves charge
                Ok(fock::spectral(&hm).unitary(h))
            };
            let full = step(now, dt)?;
            let half = step(now + 0.5 * dt, 0.5 * dt)? * step(now, 0.5 * dt)?;
            let err = linalg::max_abs_diff(&full, &half);
            if !err.is_finite() || !linalg::all_finite(&half) {
                return Err(Error::NonFinite(format!("propagator step at t = {now}")));
            }
            let allowed = (self.tol * dt).max(ROUNDOFF_FLOOR);
            let factor = if err == 0.0 {
                2.0
            } else {
                (0.9 * (allowed / err).sqrt()).clamp(0.2, 2.0)
            };
            if err <= allowed {
                u = half * u;
                now = if dt == remaining { t } else { now + dt };
                err_total += err;
                self.steps += 1;
                if dt == self.dt.min(remaining) || factor < 1.0 {
                    self.dt = dt * factor;
                }
            } else {
                self.rejected += 1;
                self.dt = dt * factor;
                if self.dt < 1e-12 * (1.0 + now.abs()) {
                    return Err(Error::NonFinite(format!("step size underflow at t = {now}")));
                }
            }
        }
        Ok((u, err_total))
    }
}

/// `U(t, s)` for a generator `t ↦ H(t)` of dimension `dim`, splitting the
/// interval at `breakpoints` (where the generator may have a kink).
pub fn propagate_generator<F>(generator: &F, dim: usize, breakpoints: &[f64], s: f64, t: f64, tol: f64) -> Result<(CMatrix, f64)>
where
    F: Fn(f64) -> Result<CMatrix>,
{
    if !(s.is_finite() && t.is_finite()) {
        return Err(Error::InvalidArgument("endpoints must be finite".into()));
    }
    let mut integrator = MidpointIntegrator::new(tol)?;
    if s == t {
        return Ok((linalg::identity(dim), 0.0));
    }
    let (a, b) = if s < t { (s, t) } else { (t, s) };
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&p| p > a && p < b).collect();
    cuts.sort_by(f64::total_cmp);
    let mut u = linalg::identity(dim);
    let mut err = 0.0;
    let mut left = a;
    for right in cuts.into_iter().chain(std::iter::once(b)) {
        let (piece, e) = integrator.advance(generator, left, right)?;
        u = piece * u;
        err += e;
        left = right;
    }
    Ok((if s < t { u } else { u.adjoint() }, err))
}

/// `U(t, s)` by direct integration; `U(s, s) = 1` exactly.
pub fn propagate(h: &TimeDependentHamiltonian, s: f64, t: f64, tol: f64) -> Result<Propagator> {
    let (u, err) = propagate_generator(&|x| h.at(x), h.dim(), &h.breakpoints(), s, t, tol)?;
    Ok(Propagator {
        u,
        s,
        t,
        method: Method::DirectIntegration,
        picture: Picture::Schrodinger,
        est_error: err,
        warning: None,
    })
}

/// `Σ_{k>n} x^k/k!`, summed directly to avoid cancellation.
pub fn exponential_tail(x: f64, n: usize) -> f64 {
    let x = x.abs();
    let mut term = 1.0;
    for k in 1..=n {
        term *= x / k as f64;
    }
    let mut sum = 0.0;
    let mut k = n + 1;
    loop {
        term *= x / k as f64;
        sum += term;
        if term <= 1e-17 * sum || term == 0.0 || k > n + 10_000 {
            break;
        }
        k += 1;
    }
    sum
}

/// Lagrange interpolation/integration data for one Gauss–Legendre panel
/// mapped to `[0, 1]`.
struct PanelRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `cumulative[j][i] = ∫_0^{x_j} ℓ_i(x) dx`.
    cumulative: Vec<Vec<f64>>,
}

impl PanelRule {
    fn new(q: usize) -> Self {
        let (x, w) = linalg::gauss_legendre(q);
        let nodes: Vec<f64> = x.iter().map(|v| 0.5 * (v + 1.0)).collect();
        let weights: Vec<f64> = w.iter().map(|v| 0.5 * v).collect();
        let lagrange = |i: usize, y: f64| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != i)
                .map(|(_, &xm)| (y - xm) / (nodes[i] - xm))
                .product::<f64>()
        };
        let cumulative = nodes
            .iter()
            .map(|&xj| {
                (0..q)
                    .map(|i| nodes.iter().zip(&weights).map(|(&y, &wy)| xj * wy * lagrange(i, xj * y)).sum())
                    .collect()
            })
            .collect();
        Self {
            nodes,
            weights,
            cumulative,
        }
    }
}

/// Nodes per Dyson quadrature panel.
const DYSON_PANEL_NODES: usize = 8;
/// Refinement stops with an error beyond this many panels.
const DYSON_MAX_PANELS: usize = 1024;

/// Truncated Dyson series `U^I(t,s) = 1 + Σ_{k≤n} (−i)^k ∫…∫ W^I…W^I` in the
/// interaction picture.
///
/// The order-`n` truncation is computed as the `n`-th Picard iterate of
/// `Y(u) = 1 − i ∫_s^u W^I(v) Y(v) dv`, which reproduces the series term by
/// term. The integrals use composite Gauss–Legendre panels; the panel count
/// doubles until successive results agree to `tol`. `sup_w`, if given,
/// replaces the sampled `sup_u ‖W_u‖` in the remainder bound.
pub fn dyson_propagator(h: &TimeDependentHamiltonian, s: f64, t: f64, order: usize, tol: f64, sup_w: Option<f64>) -> Result<Propagator> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let dim = h.dim();
    let h0 = HermitianEigen::new(h.h0().matrix());
    let sup = match sup_w {
        Some(m) => m,
        None => {
            let samples = 128;
            let mut m = 0.0f64;
            for k in 0..=samples {
                let u = s + (t - s) * k as f64 / samples as f64;
                m = m.max(linalg::spectral_norm_hermitian(h.w_at(u)?.matrix()));
            }
            m
        }
    };
    let bound = exponential_tail(sup * (t - s), order);
    let warning = (bound > DYSON_WARN_BOUND).then(|| format!("Dyson remainder bound {bound:.3e} exceeds {DYSON_WARN_BOUND}"));

    let ui = if order == 0 || s == t {
        linalg::identity(dim)
    } else {
        let rule = PanelRule::new(DYSON_PANEL_NODES);
        let mut panels = 1;
        let mut previous = picard(h, &h0, &rule, s, t, order, panels)?;
        loop {
            panels *= 2;
            if panels > DYSON_MAX_PANELS {
                return Err(Error::Quadrature(format!(
                    "Dyson integrals not stable to {tol:.1e} with {DYSON_MAX_PANELS} panels"
                )));
            }
            let next = picard(h, &h0, &rule, s, t, order, panels)?;
            let change = linalg::max_abs_diff(&next, &previous);
            previous = next;
            if change <= tol {
                break;
            }
        }
        previous
    };
    Ok(Propagator {
        u: ui,
        s,
        t,
        method: Method::Dyson(order),
        picture: Picture::Interaction,
        est_error: bound,
        warning,
    })
}

/// `W^I(u) = e^{iuH₀} W_u e^{−iuH₀}`.
fn interaction_w(h: &TimeDependentHamiltonian, h0: &HermitianEigen, u: f64) -> Result<CMatrix> {
    let w = h.w_at(u)?;
    let f = h0.unitary(-u);
    Ok(&f * w.matrix() * f.adjoint())
}

#[allow(clippy::too_many_arguments)]
fn picard(
    h: &TimeDependentHamiltonian,
    h0: &HermitianEigen,
    rule: &PanelRule,
    s: f64,
    t: f64,
    order: usize,
    panels: usize,
) -> Result<CMatrix> {
    let dim = h.dim();
    let q = rule.nodes.len();
    let width = (t - s) / panels as f64;
    let mut wi = Vec::with_capacity(panels * q);
    for p in 0..panels {
        let a = s + p as f64 * width;
        for &x in &rule.nodes {
            wi.push(interaction_w(h, h0, a + width * x)?);
        }
    }
    let id = linalg::identity(dim);
    let mut y: Vec<CMatrix> = vec![id.clone(); panels * q];
    let mut end = id.clone();
    for _ in 0..order {
        let g: Vec<CMatrix> = wi.iter().zip(&y).map(|(w, yv)| w * yv).collect();
        let mut acc = CMatrix::zeros(dim, dim);
        let mut next = Vec::with_capacity(y.len());
        for p in 0..panels {
            let block = &g[p * q..(p + 1) * q];
            for row in &rule.cumulative {
                let mut partial = acc.clone();
                for (gi, &sji) in block.iter().zip(row) {
                    partial += gi * c(width * sji);
                }
                next.push(&id - partial * I);
            }
            for (gi, &wt) in block.iter().zip(&rule.weights) {
                acc += gi * c(width * wt);
            }
        }
        end = &id - acc * I;
        y = next;
    }
    Ok(end)
}

/// `U(t,s) = e^{−itH₀} U^I(t,s) e^{isH₀}`.
pub fn interaction_to_schrodinger(ui: &Propagator, h0: &Operator, s: f64, t: f64) -> Result<Propagator> {
    if ui.picture != Picture::Interaction {
        return Err(Error::InvalidArgument("propagator is not in the interaction picture".into()));
    }
    if ui.s != s || ui.t != t {
        return Err(Error::EndpointMismatch(format!(
            "propagator covers ({}, {}), requested ({s}, {t})",
            ui.t, ui.s
        )));
    }
    h0.check_dim(ui.dim())?;
    let e = HermitianEigen::new(h0.matrix());
    Ok(Propagator {
        u: e.unitary(t) * &ui.u * e.unitary(-s),
        picture: Picture::Schrodinger,
        ..ui.clone()
    })
}

/// `U^I(t,s) = e^{itH₀} U(t,s) e^{−isH₀}`.
pub fn schrodinger_to_interaction(u: &Propagator, h0: &Operator) -> Result<Propagator> {
    if u.picture != Picture::Schrodinger {
        return Err(Error::InvalidArgument("propagator is not in the Schrödinger picture".into()));
    }
    h0.check_dim(u.dim())?;
    let e = HermitianEigen::new(h0.matrix());
    Ok(Propagator {
        u: e.unitary(-u.t) * &u.u * e.unitary(u.s),
        picture: Picture::Interaction,
        ..u.clone()
    })
}

/// `A(t) = U(t₀,t) A U(t,t₀)` for `U = U(t, t₀)`.
pub fn heisenberg_evolve(a: &Operator, u: &Propagator) -> Result<Operator> {
    a.check_dim(u.dim())?;
    let m = u.u.adjoint() * a.matrix() * &u.u;
    if a.is_hermitian() {
        Operator::hermitian(m)
    } else {
        Ok(Operator::new(m))
    }
}

/// `DA/Dt = i[H_t, A_t] + Ȧ_t`.
pub fn heisenberg_derivative(a: &Operator, da_dt: &Operator, h: &Operator) -> Result<Operator> {
    a.check_dim(h.dim())?;
    da_dt.check_dim(h.dim())?;
    let m = linalg::commutator(h.matrix(), a.matrix()) * I + da_dt.matrix();
    if a.is_hermitian() && da_dt.is_hermitian() && h.is_hermitian() {
        Operator::hermitian(m)
    } else {
        Ok(Operator::new(m))
    }
}

/// Finite-time Møller approximant and its Cauchy estimate.
#[derive(Clone, Debug)]
pub struct MollerApprox {
    pub value: Operator,
    /// `‖σ^{(s)}(A) − σ^{(s/2)}(A)‖_max`.
    pub cauchy_estimate: f64,
    /// `cauchy_estimate ≤ tol`; says nothing about the infinite-volume limit.
    pub within_tol: bool,
}

/// `σ^{(s)}(A) = e^{−isH₀} e^{isH} A e^{−isH} e^{isH₀}` with `H = H₀ + W`,
/// evaluated at `s = s_cut` and `s_cut/2`.
pub fn moller_approx(a: &Operator, h0: &Operator, w_static: &Operator, s_cut: f64, tol: f64) -> Result<MollerApprox> {
    if !(s_cut > 0.0 && s_cut.is_finite()) {
        return Err(Error::InvalidArgument(format!("cutoff must be positive, got {s_cut}")));
    }
    a.check_dim(h0.dim())?;
    w_static.check_dim(h0.dim())?;
    let hfull = h0.matrix() + w_static.matrix();
    let e0 = fock::spectral(h0.matrix());
    let e1 = fock::spectral(&hfull);
    let sigma = |s: f64| moller_at(&e0, &e1, a.matrix(), s);
    let full = sigma(s_cut);
    let half = sigma(0.5 * s_cut);
    let cauchy_estimate = linalg::max_abs_diff(&full, &half);
    let value = if a.is_hermitian() {
        Operator::hermitian(full)?
    } else {
        Operator::new(full)
    };
    Ok(MollerApprox {
        value,
        cauchy_estimate,
        within_tol: cauchy_estimate <= tol,
    })
}

fn moller_at(e0: &BlockEigen, e1: &BlockEigen, a: &CMatrix, s: f64) -> CMatrix {
    let inner = e1.conjugate(-s, a);
    e0.conjugate(s, &inner)
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"QTHMMAT1";

/// Writes a matrix as: magic, `u64` rows, `u64` cols, then row-major
/// `(re, im)` pairs, all little-endian.
pub fn write_checkpoint<P: AsRef<Path>>(path: P, m: &CMatrix) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_matrix(&mut out, m)?;
    out.flush()?;
    Ok(())
}

pub fn write_matrix<W: Write>(out: &mut W, m: &CMatrix) -> Result<()> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&(m.nrows() as u64).to_le_bytes())?;
    out.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<P: AsRef<Path>>(path: P) -> Result<CMatrix> {
    read_matrix(&mut BufReader::new(File::open(path)?))
}

pub fn read_matrix<R: Read>(input: &mut R) -> Result<CMatrix> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::InvalidArgument("not a matrix checkpoint".into()));
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let mut m = CMatrix::from_element(rows, cols, ZERO);
    for i in 0..rows {
        for j in 0..cols {
            input.read_exact(&mut word)?;
            let re = f64::from_le_bytes(word);
            input.read_exact(&mut word)?;
            let im = f64::from_le_bytes(word);
            m[(i, j)] = C64::new(re, im);
        }
    }
    Ok(m)
}
