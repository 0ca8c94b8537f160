//! Large-`L` propagation for a single local one-body drive `W_t = λ(t) V`.
//!
//! Work in the eigenbasis of `h₀ = O diag(ε) O†` and in the interaction
//! picture, where `G = Γᵀ` evolves under
//!
//! ```text
//! V^I(t) = λ(t) A_t† v A_t,     A_t = Φ diag(e^{−iεt}),   Φ = O[Λ₀, :].
//! ```
//!
//! Each step is a fourth-order Magnus exponential built from `V^I` at the
//! two Gauss points. Its exponent is supported on the span of the rows of
//! `A_{t₁}` and `A_{t₂}` (at most `2|Λ₀|` vectors), so it is exponentiated
//! there and applied as `G ← (1 + B†mB) G (1 + B†mB)†` in `O(|Λ₀|·L²)`
//! instead of a dense `L×L` exponential. The interaction-picture generator
//! oscillates at the band frequencies, which is why a second-order rule
//! would need very small steps. The Richardson difference between one full
//! step and two half steps is measured on the span of the three kicks
//! (Frobenius norm).
//!
//! Reference-state quantities `βG(λ)` and `⟨V⟩_{ρ_λ}` depend on the scalar
//! `λ` only; they are tabulated once on Chebyshev–Lobatto nodes and
//! interpolated.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, HermitianEigen, C64, ZERO};
use crate::observables::ProcessRecord;
use crate::propagator::ROUNDOFF_FLOOR;
use crate::thermo::GibbsParams;

use super::{gibbs_correlation, grand_potential, quasi_free_entropy, CorrelationMatrix, QuadraticModel};

/// Accuracy target for the reference-state interpolation.
pub const CACHE_TOL: f64 = 1e-11;
const CACHE_MIN_NODES: usize = 8;
const CACHE_MAX_NODES: usize = 256;

/// Barycentric interpolation of `βG(λ)` and `∂G/∂λ = ⟨V⟩_{ρ_λ}` on
/// Chebyshev–Lobatto nodes over `[lo, hi]`.
#[derive(Clone, Debug)]
pub struct ReferenceCache {
    lo: f64,
    hi: f64,
    nodes: Vec<f64>,
    beta_g: Vec<f64>,
    dg: Vec<f64>,
    /// Largest interpolation error seen at the last refinement.
    pub validation_error: f64,
}

/// Spectrum of a Hermitian one-body matrix, using the real solver when the
/// matrix is real.
fn one_body_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    if h.iter().all(|z| z.im == 0.0) {
        let re = h.map(|z| z.re);
        let e = re.symmetric_eigen();
        (e.eigenvalues.iter().copied().collect(), e.eigenvectors.map(c))
    } else {
        let e = HermitianEigen::new(h);
        (e.values.iter().copied().collect(), e.vectors)
    }
}

/// `(βG(λ), ⟨V⟩_{ρ_λ})` for `h₀ + λ V` with `V` supported on `region`.
fn reference_values(h0: &CMatrix, v: &CMatrix, region: &[usize], lambda: f64, p: &GibbsParams) -> (f64, f64) {
    let h = h0 + v * c(lambda);
    let (eps, o) = one_body_eigen(&h);
    let beta_g = grand_potential(&eps, p);
    // ⟨V⟩ = Σ_k f(ε_k) (O† v O)_kk, only rows in the region contribute
    let mut dg = 0.0;
    for (k, &e) in eps.iter().enumerate() {
        let f = linalg::fermi(p.beta * (e - p.mu));
        let mut diag = ZERO;
        for &i in region {
            for &j in region {
                let vij = v[(i, j)];
                if vij != ZERO {
                    diag += o[(i, k)].conj() * vij * o[(j, k)];
                }
            }
        }
        dg += f * diag.re;
    }
    (beta_g, dg)
}

fn lobatto(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..=n)
        .map(|j| {
            let x = (std::f64::consts::PI * j as f64 / n as f64).cos();
            0.5 * (lo + hi) + 0.5 * (hi - lo) * x
        })
        .collect()
}

fn barycentric(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    let n = nodes.len() - 1;
    let mut num = 0.0;
    let mut den = 0.0;
    for (j, (&xj, &fj)) in nodes.iter().zip(values).enumerate() {
        let d = x - xj;
        if d == 0.0 {
            return fj;
        }
        let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
        if j == 0 || j == n {
            w *= 0.5;
        }
        num += w * fj / d;
        den += w / d;
    }
    num / den
}

impl ReferenceCache {
    /// Tabulates on `[lo, hi]`, doubling the node count until interpolants
    /// from consecutive levels agree to `CACHE_TOL` (relative to `1 + |f|`).
    pub fn build(h0: &CMatrix, v: &CMatrix, region: &[usize], lo: f64, hi: f64, p: &GibbsParams) -> Result<Self> {
        if !(hi > lo) {
            // degenerate range: a constant control
            let (bg, dg) = reference_values(h0, v, region, lo, p);
            return Ok(Self {
                lo,
                hi: lo,
                nodes: vec![lo],
                beta_g: vec![bg],
                dg: vec![dg],
                validation_error: 0.0,
            });
        }
        let mut n = CACHE_MIN_NODES;
        let mut nodes = lobatto(n, lo, hi);
        let mut values: Vec<(f64, f64)> = nodes.iter().map(|&l| reference_values(h0, v, region, l, p)).collect();
        loop {
            let finer = lobatto(2 * n, lo, hi);
            // odd-indexed nodes of the finer grid are new
            let mut fine_values = Vec::with_capacity(finer.len());
            let mut err = 0.0f64;
            let bg: Vec<f64> = values.iter().map(|v| v.0).collect();
            let dg: Vec<f64> = values.iter().map(|v| v.1).collect();
            for (j, &x) in finer.iter().enumerate() {
                if j % 2 == 0 {
                    fine_values.push(values[j / 2]);
                } else {
                    let exact = reference_values(h0, v, region, x, p);
                    let approx = (barycentric(&nodes, &bg, x), barycentric(&nodes, &dg, x));
                    err = err
                        .max((exact.0 - approx.0).abs() / (1.0 + exact.0.abs()))
                        .max((exact.1 - approx.1).abs() / (1.0 + exact.1.abs()));
                    fine_values.push(exact);
                }
            }
            n *= 2;
            nodes = finer;
            values = fine_values;
            if err <= CACHE_TOL || n >= CACHE_MAX_NODES {
                if err > CACHE_TOL {
                    return Err(Error::Quadrature(format!("reference interpolation error {err:.2e} with {n} nodes")));
                }
                return Ok(Self {
                    lo,
                    hi,
                    nodes,
                    beta_g: values.iter().map(|v| v.0).collect(),
                    dg: values.iter().map(|v| v.1).collect(),
                    validation_error: err,
                });
            }
        }
    }

    pub fn nodes(&self) -> usize {
        self.nodes.len()
    }

    fn check(&self, lambda: f64) -> Result<()> {
        let slack = 1e-12 * (1.0 + self.hi.abs().max(self.lo.abs()));
        if lambda < self.lo - slack || lambda > self.hi + slack {
            return Err(Error::InvalidArgument(format!(
                "λ = {lambda} outside cached range [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn beta_g(&self, lambda: f64) -> Result<f64> {
        self.check(lambda)?;
        Ok(barycentric(&self.nodes, &self.beta_g, lambda.clamp(self.lo, self.hi)))
    }

    /// `∂G/∂λ`.
    pub fn gradient(&self, lambda: f64) -> Result<f64> {
        self.check(lambda)?;
        Ok(barycentric(&self.nodes, &self.dg, lambda.clamp(self.lo, self.hi)))
    }
}

/// Gram eigenvalues below this are treated as linear dependence.
const GRAM_CUTOFF: f64 = 1e-12;

/// The unitary `1 + B†mB`, `B` with orthonormal rows.
#[derive(Clone, Debug)]
struct Kick {
    basis: CMatrix,
    m: CMatrix,
}

/// Interaction-picture state plus everything needed to step it.
#[derive(Clone, Debug)]
pub struct FastProcess {
    model: QuadraticModel,
    eps: Vec<f64>,
    o: CMatrix,
    phi: CMatrix,
    v_loc: CMatrix,
    v_full: CMatrix,
    g_int: CMatrix,
    t: f64,
    tol: f64,
    dt: f64,
    steps: usize,
    rejected: usize,
    cache: ReferenceCache,
    state_entropy: f64,
}

impl FastProcess {
    /// Starts from the Gibbs state of `h₀` at time `t_start ≤ t₀`. `lambda_range`
    /// must cover every value `λ(t)` will take.
    pub fn new(model: &QuadraticModel, t_start: f64, tol: f64, lambda_range: (f64, f64)) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        let drive = model
            .drive
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("fast path needs a drive".into()))?;
        if drive.k() != 1 {
            return Err(Error::Unsupported("fast path handles a single control".into()));
        }
        let v_full = drive.dw_one_body(&drive.lambda(drive.t0()))?.remove(0);
        let region = model.lattice.local_region().to_vec();
        // the generator must not depend on λ (linear family)
        if drive.linear_terms().is_none() {
            return Err(Error::Unsupported("fast path needs a linear drive".into()));
        }
        let l = model.sites();
        for i in 0..l {
            for j in 0..l {
                let inside = model.lattice.contains_local(i) && model.lattice.contains_local(j);
                if !inside && v_full[(i, j)] != ZERO {
                    return Err(Error::NotLocal(format!("one-body drive couples ({i}, {j})")));
                }
            }
        }
        let (eps, o) = one_body_eigen(&model.h0);
        let phi = CMatrix::from_fn(region.len(), l, |a, k| o[(region[a], k)]);
        let v_loc = CMatrix::from_fn(region.len(), region.len(), |a, b| v_full[(region[a], region[b])]);
        let p = &model.params;
        let g0 = DVector::from_iterator(l, eps.iter().map(|&e| c(linalg::fermi(p.beta * (e - p.mu)))));
        let state_entropy: f64 = eps
            .iter()
            .map(|&e| {
                let f = linalg::fermi(p.beta * (e - p.mu));
                -linalg::xlogx(f, 1e-300) - linalg::xlogx(1.0 - f, 1e-300)
            })
            .sum();
        let cache = ReferenceCache::build(&model.h0, &v_full, &region, lambda_range.0, lambda_range.1, p)?;
        Ok(Self {
            model: model.clone(),
            eps,
            o,
            phi,
            v_loc,
            v_full,
            g_int: CMatrix::from_diagonal(&g0),
            t: t_start,
            tol,
            dt: 0.0,
            steps: 0,
            rejected: 0,
            cache,
            state_entropy,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> (usize, usize) {
        (self.steps, self.rejected)
    }

    pub fn cache(&self) -> &ReferenceCache {
        &self.cache
    }

    pub fn state_entropy(&self) -> f64 {
        self.state_entropy
    }

    fn lambda_eff(&self, t: f64) -> f64 {
        let d = self.model.drive.as_ref().expect("checked in new");
        if t < d.t0() {
            0.0
        } else {
            d.lambda(t)[0]
        }
    }

    fn phases(&self, t: f64) -> DVector<C64> {
        DVector::from_iterator(self.eps.len(), self.eps.iter().map(|&e| C64::from_polar(1.0, -e * t)))
    }

    /// `A_t = Φ diag(e^{−iεt})`.
    fn a_at(&self, t: f64) -> CMatrix {
        let ph = self.phases(t);
        let mut a = self.phi.clone();
        for (k, &z) in ph.iter().enumerate() {
            let mut col = a.column_mut(k);
            col *= z;
        }
        a
    }

    /// Fourth-order Magnus exponential over `[t, t + h]`:
    /// `exp(−i[h/2 (V₁ + V₂) + i√3h²/12 [V₁, V₂]])` at the two Gauss points.
    /// The exponent lives on the span of the rows of `A_{t₁}` and `A_{t₂}`.
    fn magnus_kick(&self, t: f64, h: f64) -> Kick {
        let l = self.eps.len();
        let r = self.phi.nrows();
        let off = h * 3f64.sqrt() / 6.0;
        let (t1, t2) = (t + 0.5 * h - off, t + 0.5 * h + off);
        let (l1, l2) = (self.lambda_eff(t1), self.lambda_eff(t2));
        if l1 == 0.0 && l2 == 0.0 {
            return Kick {
                basis: CMatrix::zeros(0, l),
                m: CMatrix::zeros(0, 0),
            };
        }
        let a1 = self.a_at(t1);
        let a2 = self.a_at(t2);
        let c12 = &a1 * a2.adjoint();
        let mut gram = linalg::identity(2 * r);
        gram.view_mut((0, r), (r, r)).copy_from(&c12);
        gram.view_mut((r, 0), (r, r)).copy_from(&c12.adjoint());
        let kappa = 3f64.sqrt() * h * h / 12.0;
        let y = (&self.v_loc * &c12 * &self.v_loc) * C64::new(0.0, kappa * l1 * l2);
        let mut x = CMatrix::zeros(2 * r, 2 * r);
        x.view_mut((0, 0), (r, r)).copy_from(&(&self.v_loc * c(0.5 * h * l1)));
        x.view_mut((r, r), (r, r)).copy_from(&(&self.v_loc * c(0.5 * h * l2)));
        x.view_mut((0, r), (r, r)).copy_from(&y);
        x.view_mut((r, 0), (r, r)).copy_from(&y.adjoint());
        // S = [A₁; A₂] = R Q with orthonormal rows Q = P S
        let e = HermitianEigen::new(&gram);
        let keep: Vec<usize> = (0..2 * r).filter(|&k| e.values[k] > GRAM_CUTOFF).collect();
        let pm = CMatrix::from_fn(keep.len(), 2 * r, |i, j| e.vectors[(j, keep[i])].conj() / e.values[keep[i]].sqrt());
        let rm = CMatrix::from_fn(2 * r, keep.len(), |i, j| e.vectors[(i, keep[j])] * e.values[keep[j]].sqrt());
        let mut s = CMatrix::zeros(2 * r, l);
        s.view_mut((0, 0), (r, l)).copy_from(&a1);
        s.view_mut((r, 0), (r, l)).copy_from(&a2);
        let xt = rm.adjoint() * x * &rm;
        let m = HermitianEigen::new(&xt).unitary(1.0) - linalg::identity(keep.len());
        Kick { basis: pm * s, m }
    }

    /// `G ← K G K†` with `K = 1 + B†mB`, in `O(k L²)`.
    fn apply_kick(&mut self, kick: &Kick) {
        if kick.m.nrows() == 0 {
            return;
        }
        let a = &kick.basis;
        let m = &kick.m;
        let b = a * &self.g_int;
        let cmat = &b * a.adjoint();
        let y = m * cmat * m.adjoint();
        let z = m * &b + (&y * a) * c(0.5);
        let p = a.ad_mul(&z);
        for j in 0..p.ncols() {
            for i in 0..p.nrows() {
                self.g_int[(i, j)] += p[(i, j)] + p[(j, i)].conj();
            }
        }
    }

    /// Frobenius norm of (full step − two half steps), measured on the
    /// span of the three kick subspaces.
    fn richardson_error(full: &Kick, k1: &Kick, k2: &Kick) -> f64 {
        let kicks = [full, k1, k2];
        let dims: Vec<usize> = kicks.iter().map(|k| k.m.nrows()).collect();
        let offs = [0, dims[0], dims[0] + dims[1]];
        let n: usize = dims.iter().sum();
        if n == 0 {
            return 0.0;
        }
        let mut gram = CMatrix::zeros(n, n);
        for x in 0..3 {
            for y in 0..3 {
                if dims[x] > 0 && dims[y] > 0 {
                    let block = &kicks[x].basis * kicks[y].basis.adjoint();
                    gram.view_mut((offs[x], offs[y]), (dims[x], dims[y])).copy_from(&block);
                }
            }
        }
        // D = T† Z T with T the stacked bases
        let mut z = CMatrix::zeros(n, n);
        let sign = [1.0, -1.0, -1.0];
        for x in 0..3 {
            if dims[x] > 0 {
                z.view_mut((offs[x], offs[x]), (dims[x], dims[x]))
                    .copy_from(&(&kicks[x].m * c(sign[x])));
            }
        }
        if dims[1] > 0 && dims[2] > 0 {
            let g21 = gram.view((offs[2], offs[1]), (dims[2], dims[1])).clone_owned();
            let cross = -(&k2.m * g21 * &k1.m);
            z.view_mut((offs[2], offs[1]), (dims[2], dims[1])).copy_from(&cross);
        }
        // on an orthonormal basis Q = W T of the span: Q D Q† = (W G) Z (G W†)
        let e = HermitianEigen::new(&gram);
        let keep: Vec<usize> = (0..n).filter(|&k| e.values[k] > GRAM_CUTOFF).collect();
        let w = CMatrix::from_fn(keep.len(), n, |i, j| e.vectors[(j, keep[i])].conj() / e.values[keep[i]].sqrt());
        let wg = w * &gram;
        let d = &wg * z * wg.adjoint();
        d.iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Advances the state to time `t ≥ self.time()`.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        if t < self.t {
            return Err(Error::InvalidArgument(format!("cannot step backwards from {} to {t}", self.t)));
        }
        let t0 = self.model.drive.as_ref().expect("checked in new").t0();
        if self.t < t0 {
            // W = 0 before t₀: the interaction-picture state does not move
            self.t = t.min(t0);
            if t <= t0 {
                return Ok(());
            }
        }
        if self.dt <= 0.0 {
            self.dt = (t - self.t).clamp(1e-6, 0.1);
        }
        while self.t < t {
            let now = self.t;
            let remaining = t - now;
            let mut dt = self.dt.min(remaining);
            if remaining - dt < 1e-3 * dt {
                dt = remaining;
            }
            let full = self.magnus_kick(now, dt);
            let k1 = self.magnus_kick(now, 0.5 * dt);
            let k2 = self.magnus_kick(now + 0.5 * dt, 0.5 * dt);
            let err = Self::richardson_error(&full, &k1, &k2);
            if !err.is_finite() {
                return Err(Error::NonFinite(format!("fast step at t = {now}")));
            }
            let allowed = (self.tol * dt).max(ROUNDOFF_FLOOR);
            let factor = if err == 0.0 {
                2.0
            } else {
                (0.9 * (allowed / err).powf(0.25)).clamp(0.2, 2.0)
            };
            if err <= allowed {
                self.apply_kick(&k1);
                self.apply_kick(&k2);
                self.t = if dt == remaining { t } else { now + dt };
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
        if !linalg::all_finite(&self.g_int) {
            return Err(Error::NonFinite("fast-path state".into()));
        }
        Ok(())
    }

    /// `Γ` restricted to `Λ₀` (rows and columns in region order).
    pub fn local_correlation(&self) -> CMatrix {
        let a = self.a_at(self.t);
        (&a * &self.g_int * a.adjoint()).transpose()
    }

    /// The full `Γ(t)`; `O(L³)`, for cross-checks.
    pub fn full_correlation(&self) -> CorrelationMatrix {
        let l = self.eps.len();
        let ph = DVector::from_iterator(l, self.eps.iter().map(|&e| C64::from_polar(1.0, -e * self.t)));
        let mut g = self.g_int.clone();
        for i in 0..l {
            for j in 0..l {
                g[(i, j)] *= ph[i] * ph[j].conj();
            }
        }
        let site = &self.o * g * self.o.adjoint();
        CorrelationMatrix::from_trusted(linalg::hermitian_part(&site.transpose()))
    }

    /// Ledger row at the current time (`work` and `d_probe` left at zero).
    /// The fast path has a single route to `S`; `s_trace` repeats it.
    pub fn record(&self) -> Result<ProcessRecord> {
        let p = &self.model.params;
        let t = self.t;
        let lambda = self.lambda_eff(t);
        let d = self.model.drive.as_ref().expect("checked in new");
        let lambda_dot = if t < d.t0() { 0.0 } else { d.lambda_dot(t)[0] };
        let g_loc = self.local_correlation().transpose();
        let v_mean = linalg::trace_product(&self.v_loc, &g_loc).re;
        let h0_mean: f64 = self.eps.iter().enumerate().map(|(k, &e)| e * self.g_int[(k, k)].re).sum();
        let q: f64 = (0..self.eps.len()).map(|k| self.g_int[(k, k)].re).sum();
        let u = h0_mean + lambda * v_mean;
        let beta_g = self.cache.beta_g(lambda)?;
        let g = beta_g / p.beta;
        let dg = self.cache.gradient(lambda)?;
        let s = p.beta * (u - p.mu * q - g);
        let udot = v_mean * lambda_dot;
        let gdot = dg * lambda_dot;
        Ok(ProcessRecord {
            t,
            u,
            q,
            s,
            sdot: p.beta * (udot - gdot),
            rel_s: s - self.state_entropy,
            work: 0.0,
            g,
            d_probe: 0.0,
            s_trace: s,
            sdot_decomposition: p.beta * udot - p.beta * gdot,
            udot,
            qdot: 0.0,
            gdot,
        })
    }

    /// The one-body drive generator on the full lattice.
    pub fn generator(&self) -> &CMatrix {
        &self.v_full
    }
}

/// Quasi-free entropy of the Gibbs state of `h₀`, by way of the generic
/// routines (used to cross-check the fast path's closed form).
pub fn initial_entropy(model: &QuadraticModel) -> Result<f64> {
    Ok(quasi_free_entropy(&gibbs_correlation(&model.h0, &model.params)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drive::{switch_on_protocol, LinearTerm};
    use crate::fock::{Boundary, LatticeSpec};
    use crate::quadratic::{correlation_trajectory, quadratic_entropy_ledger, quadratic_reference};

    fn model(l: usize, amp: f64) -> QuadraticModel {
        let c0 = l / 2;
        let lattice = LatticeSpec::new(l, Boundary::Dirichlet, vec![c0 - 2, c0 - 1, c0, c0 + 1]).unwrap();
        let mut v = CMatrix::zeros(l, l);
        v[(c0 - 1, c0)] = c(1.0);
        v[(c0, c0 - 1)] = c(1.0);
        v[(c0 - 2, c0 - 2)] = c(0.5);
        v[(c0 + 1, c0 - 2)] = C64::new(0.0, 0.2);
        v[(c0 - 2, c0 + 1)] = C64::new(0.0, -0.2);
        let term = LinearTerm::from_one_body(v, &lattice).unwrap().scale(amp);
        let drive = switch_on_protocol(term, 0.5, 1.0).unwrap();
        QuadraticModel::new(lattice, Some(drive), GibbsParams::new(1.2, 0.3).unwrap()).unwrap()
    }

    #[test]
    fn cache_matches_direct_reference() {
        let m = model(20, 0.3);
        let fast = FastProcess::new(&m, 0.0, 1e-9, (0.0, 1.0)).unwrap();
        for &l in &[0.0, 0.137, 0.5, 0.93, 1.0] {
            let h = &m.h0 + fast.generator() * c(l);
            let direct = quadratic_reference(&h, &m.params).unwrap();
            assert!((fast.cache().beta_g(l).unwrap() - direct.beta_g).abs() < 1e-10);
            let dg = crate::quadratic::quadratic_observable(&direct.gamma, fast.generator()).unwrap();
            assert!((fast.cache().gradient(l).unwrap() - dg).abs() < 1e-10);
        }
        assert!(fast.cache().beta_g(1.5).is_err());
    }

    #[test]
    fn fast_path_matches_dense_one_body_path() {
        let m = model(16, 0.4);
        let times: Vec<f64> = (0..=12).map(|k| 0.25 * k as f64).collect();
        let gamma0 = m.initial_state().unwrap();
        let dense = correlation_trajectory(&m, &gamma0, &times, 1e-10).unwrap();
        let mut fast = FastProcess::new(&m, 0.0, 1e-10, (0.0, 1.0)).unwrap();
        let s0 = initial_entropy(&m).unwrap();
        assert!((s0 - fast.state_entropy()).abs() < 1e-10);
        for (k, &t) in times.iter().enumerate() {
            fast.advance_to(t).unwrap();
            let diff = linalg::max_abs_diff(fast.full_correlation().matrix(), dense[k].matrix());
            assert!(diff < 1e-8, "t={t}: {diff:e}");
            let a = fast.record().unwrap();
            let b = quadratic_entropy_ledger(&dense[k], t, &m, s0).unwrap();
            for (x, y) in [(a.u, b.u), (a.q, b.q), (a.s, b.s), (a.sdot, b.sdot), (a.g, b.g), (a.rel_s, b.rel_s)] {
                assert!((x - y).abs() < 1e-7, "t={t}: {x} vs {y}");
            }
        }
    }
}
