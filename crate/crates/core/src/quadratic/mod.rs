//! Free-fermion path: quasi-free states described by the one-body
//! correlation matrix `Γ_ij = ⟨a_i* a_j⟩`.
//!
//! For `H = Σ h_ij a_i* a_j` the Heisenberg annihilators evolve as
//! `a(t) = u a` with `i∂_t u = h(t) u`, hence
//!
//! ```text
//! Γ(t) = ū Γ(s) uᵀ,   equivalently   Γ(t)ᵀ = u Γ(s)ᵀ u†.
//! ```
//!
//! Expectations of one-body operators are trace pairings,
//! `⟨Σ w_ij a_i* a_j⟩ = Σ w_ij Γ_ij`.

pub mod fast;
pub mod norm;

use crate::drive::DriveProtocol;
use crate::error::{Error, Result};
use crate::fock::{self, LatticeSpec};
use crate::linalg::{self, c, CMatrix, HermitianEigen, C64};
use crate::observables::ProcessRecord;
use crate::propagator::{self, MidpointIntegrator};
use crate::thermo::GibbsParams;

/// Pauli-bound slack on the spectrum of `Γ`.
pub const PAULI_TOL: f64 = 1e-9;

/// `Γ_ij = ⟨a_i* a_j⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    gamma: CMatrix,
}

impl CorrelationMatrix {
    /// Checks Hermiticity and the Pauli bounds `0 ≤ Γ ≤ 1`.
    pub fn new(gamma: CMatrix) -> Result<Self> {
        let drift = linalg::hermiticity_defect(&gamma);
        if drift > 1e-10 {
            return Err(Error::NotHermitian(drift));
        }
        let gamma = linalg::hermitian_part(&gamma);
        let e = HermitianEigen::new(&gamma);
        if e.min() < -PAULI_TOL || e.max() > 1.0 + PAULI_TOL {
            return Err(Error::InvalidState(format!(
                "correlation spectrum [{:.3e}, {:.3e}] violates Pauli bounds",
                e.min(),
                e.max()
            )));
        }
        Ok(Self { gamma })
    }

    pub fn from_trusted(gamma: CMatrix) -> Self {
        Self { gamma }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.gamma
    }

    pub fn sites(&self) -> usize {
        self.gamma.nrows()
    }

    /// `tr Γ = ⟨N⟩`.
    pub fn particle_number(&self) -> f64 {
        linalg::trace(&self.gamma).re
    }

    /// Sorted eigenvalues (occupation numbers of the natural orbitals).
    pub fn occupations(&self) -> Vec<f64> {
        let mut v: Vec<f64> = HermitianEigen::new(&self.gamma).values.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// `Γ = f(h)ᵀ` with `f(x) = 1/(1 + e^{β(x−μ)})`.
pub fn gibbs_correlation(h: &CMatrix, p: &GibbsParams) -> Result<CorrelationMatrix> {
    p.validate()?;
    let drift = linalg::hermiticity_defect(h);
    if drift > fock::HERMITIAN_TOL {
        return Err(Error::NotHermitian(drift));
    }
    let e = HermitianEigen::new(h);
    let f = e.apply(|x| c(linalg::fermi(p.beta * (x - p.mu))));
    Ok(CorrelationMatrix {
        gamma: linalg::hermitian_part(&f.transpose()),
    })
}

/// `βG = −Σ_k ln(1 + e^{−β(ε_k − μ)})` over the one-body spectrum.
pub fn grand_potential(eigenvalues: &[f64], p: &GibbsParams) -> f64 {
    -eigenvalues.iter().map(|&e| linalg::softplus(-p.beta * (e - p.mu))).sum::<f64>()
}

/// `Σ_ij w_ij Γ_ij`.
pub fn quadratic_expectation(gamma: &CorrelationMatrix, w: &CMatrix) -> Result<C64> {
    if w.shape() != gamma.gamma.shape() {
        return Err(Error::DimensionMismatch {
            expected: gamma.sites(),
            found: w.nrows(),
        });
    }
    Ok(w.iter().zip(gamma.gamma.iter()).map(|(a, b)| a * b).sum())
}

/// `⟨Σ w_ij a_i* a_j⟩` for Hermitian `w`.
pub fn quadratic_observable(gamma: &CorrelationMatrix, w: &CMatrix) -> Result<f64> {
    Ok(quadratic_expectation(gamma, w)?.re)
}

/// Entropy of the quasi-free state, `−Σ [ν ln ν + (1−ν) ln(1−ν)]`.
pub fn quasi_free_entropy(gamma: &CorrelationMatrix) -> f64 {
    gamma
        .occupations()
        .into_iter()
        .map(|v| -linalg::xlogx(v, 1e-15) - linalg::xlogx(1.0 - v, 1e-15))
        .sum()
}

/// `Γ ↦ ū Γ uᵀ`.
pub fn conjugate_correlation(gamma: &CorrelationMatrix, u: &CMatrix) -> CorrelationMatrix {
    let g = u.map(|z| z.conj()) * &gamma.gamma * u.transpose();
    CorrelationMatrix {
        gamma: linalg::hermitian_part(&g),
    }
}

/// `Γ(t)` from `Γ(s)` under the one-body generator `h(·)`, integrated with
/// the same midpoint scheme and error control as the Fock-space propagator.
pub fn evolve_correlation<F>(gamma0: &CorrelationMatrix, h: &F, breakpoints: &[f64], s: f64, t: f64, tol: f64) -> Result<CorrelationMatrix>
where
    F: Fn(f64) -> Result<CMatrix>,
{
    let (u, _) = propagator::propagate_generator(h, gamma0.sites(), breakpoints, s, t, tol)?;
    Ok(conjugate_correlation(gamma0, &u))
}

/// A free-fermion system: hopping matrix, quadratic drive and `(β, μ)`.
#[derive(Clone, Debug)]
pub struct QuadraticModel {
    pub lattice: LatticeSpec,
    pub h0: CMatrix,
    pub drive: Option<DriveProtocol>,
    pub params: GibbsParams,
}

impl QuadraticModel {
    /// Uses the lattice Laplacian as `h₀`; rejects non-quadratic drives.
    pub fn new(lattice: LatticeSpec, drive: Option<DriveProtocol>, params: GibbsParams) -> Result<Self> {
        params.validate()?;
        if let Some(d) = &drive {
            if !d.is_quadratic() {
                return Err(Error::NotQuadratic("drive has no one-body form".into()));
            }
        }
        let h0 = fock::single_particle_laplacian(&lattice).map(c);
        Ok(Self {
            lattice,
            h0,
            drive,
            params,
        })
    }

    pub fn sites(&self) -> usize {
        self.lattice.sites()
    }

    /// `h(t) = h₀ + w(λ(t))`.
    pub fn h_at(&self, t: f64) -> Result<CMatrix> {
        match &self.drive {
            Some(d) if t >= d.t0() => Ok(&self.h0 + d.w_one_body(&d.lambda(t))?),
            _ => Ok(self.h0.clone()),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.drive.iter().map(DriveProtocol::t0).collect()
    }

    pub fn initial_state(&self) -> Result<CorrelationMatrix> {
        gibbs_correlation(&self.h0, &self.params)
    }
}

/// The reference (instantaneous Gibbs) state of a one-body Hamiltonian.
#[derive(Clone, Debug)]
pub struct QuadraticReference {
    pub beta_g: f64,
    pub g: f64,
    pub gamma: CorrelationMatrix,
    pub eigen: HermitianEigen,
}

pub fn quadratic_reference(h_t: &CMatrix, p: &GibbsParams) -> Result<QuadraticReference> {
    let eigen = HermitianEigen::new(h_t);
    let values: Vec<f64> = eigen.values.iter().copied().collect();
    let beta_g = grand_potential(&values, p);
    let gamma = gibbs_correlation(h_t, p)?;
    Ok(QuadraticReference {
        beta_g,
        g: beta_g / p.beta,
        gamma,
        eigen,
    })
}

/// Every ledger field at time `t` for a quasi-free state, with all
/// expectations reduced to trace pairings. `state_entropy` is the von
/// Neumann entropy of the true state (conserved along the evolution), which
/// turns `S(t)` into the relative entropy.
pub fn quadratic_entropy_ledger(gamma: &CorrelationMatrix, t: f64, model: &QuadraticModel, state_entropy: f64) -> Result<ProcessRecord> {
    let p = &model.params;
    let h_t = model.h_at(t)?;
    let reference = quadratic_reference(&h_t, p)?;
    let u = quadratic_observable(gamma, &h_t)?;
    let q = gamma.particle_number();
    let s = p.beta * (u - p.mu * q - reference.g);
    // second route: occupations of the reference eigenmodes
    let gt = gamma.matrix().transpose();
    let occ = reference.eigen.vectors.adjoint() * gt * &reference.eigen.vectors;
    let k_mean: f64 = reference
        .eigen
        .values
        .iter()
        .enumerate()
        .map(|(k, &e)| (e - p.mu) * occ[(k, k)].re)
        .sum();
    let s_trace = p.beta * k_mean - reference.beta_g;

    let (udot, gdot) = match &model.drive {
        Some(d) if t >= d.t0() => {
            let (l, ld) = d.control(t);
            let dw = d.dw_one_body(&l)?;
            let mut ud = 0.0;
            let mut gd = 0.0;
            for (w, &x) in dw.iter().zip(&ld) {
                ud += quadratic_observable(gamma, w)? * x;
                gd += quadratic_observable(&reference.gamma, w)? * x;
            }
            (ud, gd)
        }
        _ => (0.0, 0.0),
    };
    let sdot = p.beta * (udot - gdot);
    Ok(ProcessRecord {
        t,
        u,
        q,
        s,
        sdot,
        rel_s: s - state_entropy,
        work: 0.0,
        g: reference.g,
        d_probe: 0.0,
        s_trace,
        // number-conserving one-body drives have q̇ = 0
        sdot_decomposition: p.beta * udot - p.beta * gdot,
        udot,
        qdot: 0.0,
        gdot,
    })
}

/// Correlation matrices along an output grid, starting from `Γ(times[0])`.
pub fn correlation_trajectory(
    model: &QuadraticModel,
    gamma0: &CorrelationMatrix,
    times: &[f64],
    tol: f64,
) -> Result<Vec<CorrelationMatrix>> {
    let mut out = Vec::with_capacity(times.len());
    let Some(&first) = times.first() else {
        return Ok(out);
    };
    let breaks = model.breakpoints();
    let gen = |x: f64| model.h_at(x);
    let mut integrator = MidpointIntegrator::new(tol)?;
    let mut gamma = gamma0.clone();
    out.push(gamma.clone());
    let mut now = first;
    for &t in &times[1..] {
        if !(t > now) {
            return Err(Error::NonMonotoneGrid(out.len()));
        }
        let mut left = now;
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&b| b > now && b < t).collect();
        cuts.push(t);
        for right in cuts {
            let (u, _) = integrator.advance(&gen, left, right)?;
            gamma = conjugate_correlation(&gamma, &u);
            left = right;
        }
        out.push(gamma.clone());
        now = t;
    }
    Ok(out)
}
