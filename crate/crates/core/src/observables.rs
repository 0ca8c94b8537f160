//! Thermodynamic bookkeeping along a trajectory: internal energy, charge,
//! the entropy functional, their rates, `∂G/∂λ`, work and the first-law
//! residual.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{self, Operator};
use crate::linalg::{self, c, CMatrix, I};
use crate::propagator::TimeDependentHamiltonian;
use crate::thermo::{self, DensityMatrix, GibbsParams, GibbsState, EIGEN_FLOOR};

/// Centred step in the gauge angle for the finite-difference charge route.
pub const TAU_STEP: f64 = 1e-4;

/// Tolerance for `[ρ_t, H_t − μN] = 0` when pairing a reference state with
/// a Hamiltonian.
const REFERENCE_MATCH_TOL: f64 = 1e-8;

/// One row of the thermodynamic ledger.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ProcessRecord {
    pub t: f64,
    /// `⟨H_t⟩`.
    pub u: f64,
    /// `⟨N⟩`.
    pub q: f64,
    /// `β[⟨H_t − μN⟩ − G]`.
    pub s: f64,
    /// Entropy rate from the `∂W/∂λ` formula.
    pub sdot: f64,
    /// `D(ρ(t) ‖ ρ_t)`.
    pub rel_s: f64,
    /// Accumulated `∫ đA` up to `t`; filled by [`work_accumulate`].
    pub work: f64,
    /// Grand potential of the reference state.
    pub g: f64,
    /// Probe deviation; filled by the harness.
    pub d_probe: f64,
    /// `−tr ρ(t) ln ρ_t`, the second route to `s`.
    pub s_trace: f64,
    /// `βU̇ − βμq̇ − β(∂G/∂λ)·λ̇`, the second route to `sdot`.
    pub sdot_decomposition: f64,
    pub udot: f64,
    pub qdot: f64,
    /// `(∂G/∂λ)·λ̇`.
    pub gdot: f64,
}

/// `⟨H_t⟩_ρ`.
pub fn internal_energy(rho: &DensityMatrix, h_t: &Operator) -> Result<f64> {
    h_t.check_dim(rho.dim())?;
    Ok(rho.expect(h_t))
}

/// `⟨N⟩_ρ`.
pub fn charge(rho: &DensityMatrix, n: &Operator) -> Result<f64> {
    n.check_dim(rho.dim())?;
    Ok(rho.expect(n))
}

/// Both routes to the entropy functional.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EntropyValue {
    /// `β[⟨H_t − μN⟩_ρ − G]`.
    pub formula: f64,
    /// `−tr(ρ ln ρ_t)`, through the spectral decomposition of `ρ_t`.
    pub trace_route: f64,
}

fn check_reference(h_t: &Operator, n: &Operator, p: &GibbsParams, reference: &GibbsState) -> Result<CMatrix> {
    let k = h_t.matrix() - n.matrix() * c(p.mu);
    let defect = linalg::max_abs(&linalg::commutator(reference.rho.matrix(), &k));
    if defect > REFERENCE_MATCH_TOL {
        return Err(Error::InvalidArgument(format!(
            "reference state does not belong to this Hamiltonian (commutator {defect:.3e})"
        )));
    }
    Ok(k)
}

/// `S(t) = β[⟨H_t − μN⟩ − G]`, cross-checked against `−tr ρ ln ρ_t`.
pub fn entropy_s(rho: &DensityMatrix, h_t: &Operator, n: &Operator, p: &GibbsParams, reference: &GibbsState) -> Result<EntropyValue> {
    h_t.check_dim(rho.dim())?;
    let k = check_reference(h_t, n, p, reference)?;
    let formula = p.beta * (rho.expect_complex(&k).re - reference.g);
    let eig = fock::spectral(reference.rho.matrix());
    let mut trace_route = 0.0;
    for (lambda, v) in eig.eigenpairs() {
        if lambda > EIGEN_FLOOR {
            let w = (v.adjoint() * rho.matrix() * &v)[(0, 0)].re;
            trace_route -= w * lambda.ln();
        }
    }
    Ok(EntropyValue { formula, trace_route })
}

fn check_controls(dw: &[Operator], lambda_dot: &[f64]) -> Result<()> {
    if dw.len() != lambda_dot.len() {
        return Err(Error::ControlMismatch {
            expected: dw.len(),
            found: lambda_dot.len(),
        });
    }
    Ok(())
}

/// `U̇ = ⟨∂W/∂λ⟩_ρ · λ̇`.
pub fn energy_rate(rho: &DensityMatrix, dw_dlambda: &[Operator], lambda_dot: &[f64]) -> Result<f64> {
    check_controls(dw_dlambda, lambda_dot)?;
    let mut acc = 0.0;
    for (d, &ld) in dw_dlambda.iter().zip(lambda_dot) {
        d.check_dim(rho.dim())?;
        acc += rho.expect(d) * ld;
    }
    Ok(acc)
}

/// Both routes to the charge rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChargeRate {
    /// `i⟨[W, N]⟩`.
    pub commutator: f64,
    /// `−∂_τ⟨φ_τ(W)⟩` at `τ = 0`, by a centred difference with step `1e−4`.
    pub finite_difference: f64,
}

/// `q̇ = i⟨[W, N]⟩ = −∂_τ⟨φ_τ(W)⟩|₀`.
pub fn charge_rate(rho: &DensityMatrix, w_t: &Operator, n: &Operator) -> Result<ChargeRate> {
    w_t.check_dim(rho.dim())?;
    n.check_dim(rho.dim())?;
    let comm = linalg::commutator(w_t.matrix(), n.matrix()) * I;
    let commutator = rho.expect_complex(&comm).re;
    let plus = fock::gauge_transform(w_t, TAU_STEP)?;
    let minus = fock::gauge_transform(w_t, -TAU_STEP)?;
    let finite_difference = -(rho.expect_complex(plus.matrix()).re - rho.expect_complex(minus.matrix()).re) / (2.0 * TAU_STEP);
    Ok(ChargeRate {
        commutator,
        finite_difference,
    })
}

/// `∂G/∂λ_j = ⟨∂W/∂λ_j⟩_{ρ_t}` given the reference state.
pub fn gibbs_gradient_in(reference: &GibbsState, dw_dlambda: &[Operator]) -> Result<Vec<f64>> {
    dw_dlambda
        .iter()
        .map(|d| {
            d.check_dim(reference.rho.dim())?;
            Ok(reference.rho.expect(d))
        })
        .collect()
}

/// `∂G/∂λ = ⟨∂W/∂λ⟩_{ρ_t}`, computing the reference state of `H_t`.
pub fn gibbs_gradient(h_t: &Operator, n: &Operator, p: &GibbsParams, dw_dlambda: &[Operator]) -> Result<Vec<f64>> {
    let reference = thermo::reference_state(h_t, n, p)?;
    gibbs_gradient_in(&reference, dw_dlambda)
}

/// Both routes to the entropy rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EntropyRate {
    /// `β[⟨∂W/∂λ⟩_ρ − ⟨∂W/∂λ⟩_{ρ_t}]·λ̇ + βμ ∂_τ⟨φ_τ(W)⟩|₀`.
    pub formula: f64,
    /// `βU̇ − βμq̇ − β(∂G/∂λ)·λ̇`.
    pub decomposition: f64,
    pub udot: f64,
    pub qdot: f64,
    pub gdot: f64,
}

/// The entropy production rate.
///
/// The gauge-angle derivative in the formula is taken analytically,
/// `∂_τ⟨φ_τ(W)⟩|₀ = i⟨[N, W]⟩`; the decomposition uses `q̇ = i⟨[W, N]⟩`, so
/// the two agree by the sign identity between them.
#[allow(clippy::too_many_arguments)]
pub fn entropy_rate(
    rho_true: &DensityMatrix,
    reference: &GibbsState,
    dw_dlambda: &[Operator],
    lambda_dot: &[f64],
    w_t: &Operator,
    n: &Operator,
    p: &GibbsParams,
) -> Result<EntropyRate> {
    check_controls(dw_dlambda, lambda_dot)?;
    let true_grad: Vec<f64> = dw_dlambda.iter().map(|d| rho_true.expect(d)).collect();
    let ref_grad = gibbs_gradient_in(reference, dw_dlambda)?;
    let dot = |v: &[f64]| v.iter().zip(lambda_dot).map(|(a, b)| a * b).sum::<f64>();
    let tau_derivative = rho_true.expect_complex(&(linalg::commutator(n.matrix(), w_t.matrix()) * I)).re;
    let formula = p.beta * (dot(&true_grad) - dot(&ref_grad)) + p.beta * p.mu * tau_derivative;
    let udot = dot(&true_grad);
    let qdot = charge_rate(rho_true, w_t, n)?.commutator;
    let gdot = dot(&ref_grad);
    let decomposition = p.beta * udot - p.beta * p.mu * qdot - p.beta * gdot;
    Ok(EntropyRate {
        formula,
        decomposition,
        udot,
        qdot,
        gdot,
    })
}

/// `C = β(Σ_j ‖∂W/∂λ_j‖·|λ̇_j| + |μ|·‖[W, N]‖)`: if every probe deviation is
/// at most `ε`, the entropy rate is bounded by `C·ε` for probes spanning the
/// relevant operators.
pub fn saturation_constant(dw_dlambda: &[Operator], lambda_dot: &[f64], w_t: &Operator, n: &Operator, p: &GibbsParams) -> Result<f64> {
    check_controls(dw_dlambda, lambda_dot)?;
    let mut acc = 0.0;
    for (d, &ld) in dw_dlambda.iter().zip(lambda_dot) {
        acc += linalg::spectral_norm_hermitian(d.matrix()) * ld.abs();
    }
    let comm = linalg::commutator(w_t.matrix(), n.matrix()) * I;
    acc += p.mu.abs() * linalg::spectral_norm_hermitian(&comm);
    Ok(p.beta * acc)
}

/// Every exact-path ledger field at one time, except `work` and `d_probe`.
pub fn exact_record(t: f64, rho: &DensityMatrix, h: &TimeDependentHamiltonian, n: &Operator, p: &GibbsParams) -> Result<ProcessRecord> {
    let h_t = h.operator_at(t)?;
    let reference = thermo::reference_state(&h_t, n, p)?;
    let s = entropy_s(rho, &h_t, n, p, &reference)?;
    let w_t = h.w_at(t)?;
    let (dw, lambda_dot) = match h.drive() {
        Some(d) if t >= d.t0() => {
            let (l, ld) = d.control(t);
            (d.dw_fock(&l)?, ld)
        }
        Some(d) => (d.dw_fock(&d.lambda(d.t0()))?, vec![0.0; d.k()]),
        None => (Vec::new(), Vec::new()),
    };
    let rate = entropy_rate(rho, &reference, &dw, &lambda_dot, &w_t, n, p)?;
    let rel = thermo::relative_entropy(rho, &reference.rho)?;
    Ok(ProcessRecord {
        t,
        u: internal_energy(rho, &h_t)?,
        q: charge(rho, n)?,
        s: s.formula,
        sdot: rate.formula,
        rel_s: rel,
        work: 0.0,
        g: reference.g,
        d_probe: 0.0,
        s_trace: s.trace_route,
        sdot_decomposition: rate.decomposition,
        udot: rate.udot,
        qdot: rate.qdot,
        gdot: rate.gdot,
    })
}

fn check_grid(records: &[ProcessRecord]) -> Result<()> {
    for (i, w) in records.windows(2).enumerate() {
        if !(w[1].t > w[0].t) {
            return Err(Error::NonMonotoneGrid(i + 1));
        }
    }
    Ok(())
}

/// Fills the `work` column with `∫ đA`, `đA = −μ dq − (∂G/∂λ)·dλ`, using the
/// trapezoid rule on the output grid. Returns the total.
pub fn work_accumulate(records: &mut [ProcessRecord], mu: f64) -> Result<f64> {
    check_grid(records)?;
    let mut acc = 0.0;
    if let Some(first) = records.first_mut() {
        first.work = 0.0;
    }
    for i in 1..records.len() {
        let (a, b) = (&records[i - 1], &records[i]);
        let dt = b.t - a.t;
        acc += -mu * 0.5 * (a.qdot + b.qdot) * dt - 0.5 * (a.gdot + b.gdot) * dt;
        records[i].work = acc;
    }
    Ok(acc)
}

/// `ΔS` directly and as the trapezoid integral of the rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeltaEntropy {
    pub direct: f64,
    pub quadrature: f64,
}

pub fn delta_entropy(records: &[ProcessRecord]) -> Result<DeltaEntropy> {
    check_grid(records)?;
    let (Some(first), Some(last)) = (records.first(), records.last()) else {
        return Ok(DeltaEntropy {
            direct: 0.0,
            quadrature: 0.0,
        });
    };
    let quadrature = records.windows(2).map(|w| 0.5 * (w[0].sdot + w[1].sdot) * (w[1].t - w[0].t)).sum();
    Ok(DeltaEntropy {
        direct: last.s - first.s,
        quadrature,
    })
}

/// `ΔU − TΔS + ∫ đA` over the whole series, with `T = 1/β`. Requires the
/// `work` column to be filled.
pub fn first_law_residual(records: &[ProcessRecord], beta: f64) -> Result<f64> {
    check_grid(records)?;
    let (Some(first), Some(last)) = (records.first(), records.last()) else {
        return Ok(0.0);
    };
    Ok((last.u - first.u) - (last.s - first.s) / beta + last.work)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drive::{switch_on_protocol, KernelEntry, KernelSpec, LinearTerm};
    use crate::fock::{annihilation_op, creation_op, hopping_hamiltonian, number_operator, Boundary, LatticeSpec};
    use crate::thermo::gibbs_state;

    #[test]
    fn maximally_mixed_charge_is_half_filling() {
        let spec = LatticeSpec::full(4, Boundary::Dirichlet).unwrap();
        let n = number_operator(&spec).unwrap();
        assert!((charge(&DensityMatrix::maximally_mixed(16), &n).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn charge_rate_routes() {
        let spec = LatticeSpec::new(3, Boundary::Dirichlet, vec![0, 1]).unwrap();
        let n = number_operator(&spec).unwrap();
        let h0 = hopping_hamiltonian(&spec).unwrap();
        let a0 = annihilation_op(&spec, 0).unwrap();
        let probe = (&a0 + &a0.adjoint()).certify().unwrap();
        // a state with coherences between sectors
        let shift = linalg::trace(h0.matrix()) / c(8.0);
        let centred = h0.matrix() - linalg::identity(8) * shift;
        let quadrature = (a0.adjoint().matrix() - a0.matrix()) * I;
        let mixed = (centred * c(0.1) + quadrature * c(0.05) + linalg::identity(8)) * c(1.0 / 8.0);
        let rho = DensityMatrix::new(mixed).unwrap();
        let w = (&probe + &(&creation_op(&spec, 1).unwrap() * &a0)).adjoint();
        let w = (&w + &w.adjoint()).scale(0.5).certify().unwrap();
        let r = charge_rate(&rho, &w, &n).unwrap();
        assert!(r.commutator.abs() > 1e-4);
        assert!((r.commutator - r.finite_difference).abs() < 1e-6);
        let gauge = h0.scale(0.3);
        let r0 = charge_rate(&rho, &gauge, &n).unwrap();
        assert!(r0.commutator.abs() < 1e-10 && r0.finite_difference.abs() < 1e-10);
    }

    #[test]
    fn gibbs_gradient_at_zero_coupling_is_free_expectation() {
        let spec = LatticeSpec::new(3, Boundary::Dirichlet, vec![1]).unwrap();
        let n = number_operator(&spec).unwrap();
        let h0 = hopping_hamiltonian(&spec).unwrap();
        let p = GibbsParams::new(1.1, 0.4).unwrap();
        let v = crate::drive::build_perturbation(
            &[KernelSpec {
                degree: 1,
                entries: vec![KernelEntry::new(vec![1], vec![1], c(1.0))],
            }],
            &spec,
        )
        .unwrap();
        let grad = gibbs_gradient(&h0, &n, &p, std::slice::from_ref(&v)).unwrap();
        let free = gibbs_state(&h0, &n, &p).unwrap().rho.expect(&v);
        assert!((grad[0] - free).abs() < 1e-12);
        // finite differences of βG/β in λ
        let h = 1e-4;
        let g = |l: f64| gibbs_state(&(&h0 + &v.scale(l)), &n, &p).unwrap().g;
        let fd = (g(h) - g(-h)) / (2.0 * h);
        assert!((fd - grad[0]).abs() < 1e-6);
    }

    #[test]
    fn zero_drive_rates_vanish() {
        let spec = LatticeSpec::new(3, Boundary::Dirichlet, vec![0]).unwrap();
        let n = number_operator(&spec).unwrap();
        let p = GibbsParams::new(1.0, 0.2).unwrap();
        let term = LinearTerm::from_kernels(
            vec![KernelSpec {
                degree: 1,
                entries: vec![KernelEntry::new(vec![0], vec![0], c(0.0))],
            }],
            &spec,
        )
        .unwrap();
        let h = TimeDependentHamiltonian::new(
            hopping_hamiltonian(&spec).unwrap(),
            switch_on_protocol(term, 0.0, 1.0).unwrap(),
            &spec,
        )
        .unwrap();
        let g = gibbs_state(h.h0(), &n, &p).unwrap();
        let s0 = thermo::von_neumann_entropy(&g.rho).unwrap();
        let rec = exact_record(0.5, &g.rho, &h, &n, &p).unwrap();
        assert!(rec.rel_s.abs() < 1e-10);
        assert!(rec.sdot.abs() < 1e-14 && rec.udot.abs() < 1e-14);
        assert!((rec.s - s0).abs() < 1e-10 && (rec.s_trace - s0).abs() < 1e-10);
    }

    #[test]
    fn grid_must_increase() {
        let mut rs = vec![
            ProcessRecord {
                t: 0.0,
                ..Default::default()
            },
            ProcessRecord {
                t: 0.0,
                ..Default::default()
            },
        ];
        assert!(matches!(work_accumulate(&mut rs, 0.0), Err(Error::NonMonotoneGrid(1))));
    }
}
