//! Grand-canonical Gibbs states, reference states, and entropies.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, Operator};
use crate::linalg::{self, c, CMatrix, C64};
use crate::propagator::{self, Propagator};

/// Eigenvalues at or below this are treated as exact zeros in `x ln x` and
/// as the null space of a reference state.
pub const EIGEN_FLOOR: f64 = 1e-14;
/// Eigenvalues below `−NEGATIVE_TOL` make a matrix an invalid state.
pub const NEGATIVE_TOL: f64 = 1e-12;
/// Weight of the true state that may sit in the reference state's null space.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Inverse temperature and chemical potential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsParams {
    pub beta: f64,
    pub mu: f64,
}

impl GibbsParams {
    pub fn new(beta: f64, mu: f64) -> Result<Self> {
        let p = Self { beta, mu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidBeta(self.beta));
        }
        if !self.mu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "chemical potential must be finite, got {}",
                self.mu
            )));
        }
        Ok(())
    }
}

/// A positive semidefinite, unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity.
    pub fn new(m: CMatrix) -> Result<Self> {
        let op = Operator::hermitian(m).map_err(|e| Error::InvalidState(e.to_string()))?;
        let m = op.into_matrix();
        let tr = linalg::trace(&m);
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::InvalidState(format!("trace {tr} differs from one")));
        }
        let min = fock::spectral(&m).min();
        if min < -NEGATIVE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self { m })
    }

    /// Skips validation; for states produced by trusted constructions.
    pub fn from_trusted(m: CMatrix) -> Self {
        Self { m }
    }

    /// `|ψ⟩⟨ψ|` for a normalized vector.
    pub fn pure(psi: &nalgebra::DVector<C64>) -> Result<Self> {
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("vector norm {norm} is not one")));
        }
        Ok(Self { m: psi * psi.adjoint() })
    }

    /// `1/dim`.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            m: linalg::identity(dim) * c(1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    /// `tr(ρA)`.
    pub fn expect_complex(&self, a: &CMatrix) -> C64 {
        linalg::trace_product(&self.m, a)
    }

    /// `Re tr(ρA)`, the expectation of a Hermitian observable.
    pub fn expect(&self, a: &Operator) -> f64 {
        self.expect_complex(a.matrix()).re
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.m).re
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.m, &self.m).re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        fock::spectral(&self.m).min()
    }

    pub fn write_checkpoint<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        propagator::write_checkpoint(path, &self.m)
    }

    pub fn read_checkpoint<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::new(propagator::read_checkpoint(path)?)
    }
}

/// A Gibbs state with its grand potential.
#[derive(Clone, Debug)]
pub struct GibbsState {
    pub rho: DensityMatrix,
    /// `βG = −ln Ξ`.
    pub beta_g: f64,
    /// `G = βG / β`.
    pub g: f64,
    /// Eigenvalues of `K = H − μN`.
    pub spectrum: Vec<f64>,
    /// Smallest eigenvalue of `ρ`.
    pub min_eigenvalue: f64,
}

/// `ρ = e^{−β(H − μN)}/Ξ` and `βG = −ln Ξ`, with the spectrum shifted by its
/// minimum before exponentiation.
pub fn gibbs_state(h: &Operator, n: &Operator, p: &GibbsParams) -> Result<GibbsState> {
    p.validate()?;
    h.check_dim(n.dim())?;
    if !h.is_hermitian() {
        return Err(Error::NotHermitian(linalg::hermiticity_defect(h.matrix())));
    }
    let k = h.matrix() - n.matrix() * c(p.mu);
    let eig = fock::spectral(&k);
    let spectrum = eig.values();
    let kmin = eig.min();
    let shifted_sum: f64 = spectrum.iter().map(|&x| (-p.beta * (x - kmin)).exp()).sum();
    let beta_g = p.beta * kmin - shifted_sum.ln();
    let rho = eig.apply(|x| c((-p.beta * (x - kmin)).exp() / shifted_sum));
    let min_eigenvalue = (-p.beta * (eig.max() - kmin)).exp() / shifted_sum;
    Ok(GibbsState {
        rho: DensityMatrix::from_trusted(linalg::hermitian_part(&rho)),
        beta_g,
        g: beta_g / p.beta,
        spectrum,
        min_eigenvalue,
    })
}

/// The Gibbs state of the instantaneous Hamiltonian `H_t`.
pub fn reference_state(h_t: &Operator, n: &Operator, p: &GibbsParams) -> Result<GibbsState> {
    gibbs_state(h_t, n, p)
}

/// `ρ(t) = U ρ U†`.
pub fn evolve_state(rho0: &DensityMatrix, u: &Propagator) -> Result<DensityMatrix> {
    if rho0.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho0.dim(),
            found: u.dim(),
        });
    }
    let m = u.matrix() * rho0.matrix() * u.matrix().adjoint();
    Ok(DensityMatrix::from_trusted(linalg::hermitian_part(&m)))
}

fn checked_spectrum(rho: &DensityMatrix) -> Result<linalg::BlockEigen> {
    let eig = fock::spectral(rho.matrix());
    let min = eig.min();
    if min < -NEGATIVE_TOL {
        return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
    }
    Ok(eig)
}

/// `S = −tr ρ ln ρ`; eigenvalues at or below `1e−14` contribute nothing.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let eig = checked_spectrum(rho)?;
    Ok(-eig.values().iter().map(|&x| linalg::xlogx(x, EIGEN_FLOOR)).sum::<f64>())
}

/// `D(true ‖ reference) = tr ρ (ln ρ − ln σ)`, which the thermodynamic
/// notation writes `S(σ | ρ)` with the reference state first.
///
/// The true state may only carry weight `≤ 1e−12` on the reference state's
/// null space (eigenvalues `≤ 1e−14`); otherwise the deficient eigenspace is
/// reported.
pub fn relative_entropy(true_state: &DensityMatrix, reference: &DensityMatrix) -> Result<f64> {
    if true_state.dim() != reference.dim() {
        return Err(Error::DimensionMismatch {
            expected: reference.dim(),
            found: true_state.dim(),
        });
    }
    let sig = checked_spectrum(reference)?;
    let mut null_dim = 0;
    let mut null_weight = 0.0;
    let mut null_eig = 0.0f64;
    let mut cross = 0.0;
    for (lambda, v) in sig.eigenpairs() {
        let weight = (v.adjoint() * true_state.matrix() * &v)[(0, 0)].re;
        if lambda <= EIGEN_FLOOR {
            null_dim += 1;
            null_weight += weight.max(0.0);
            null_eig = null_eig.max(lambda);
        } else {
            cross += weight * lambda.ln();
        }
    }
    if null_weight > SUPPORT_TOL {
        return Err(Error::SupportViolation {
            eigenvalue: null_eig,
            dim: null_dim,
            weight: null_weight,
        });
    }
    let neg_entropy = -von_neumann_entropy(true_state)?;
    Ok(neg_entropy - cross)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{hopping_hamiltonian, number_operator, Boundary, LatticeSpec};
    use nalgebra::DVector;

    fn diag(v: &[f64]) -> DensityMatrix {
        DensityMatrix::new(CMatrix::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|&x| c(x))))).unwrap()
    }

    #[test]
    fn infinite_temperature_limit() {
        let spec = LatticeSpec::full(3, Boundary::Dirichlet).unwrap();
        let g = gibbs_state(
            &hopping_hamiltonian(&spec).unwrap(),
            &number_operator(&spec).unwrap(),
            &GibbsParams::new(1e-8, 0.0).unwrap(),
        )
        .unwrap();
        assert!(linalg::max_abs_diff(g.rho.matrix(), &(linalg::identity(8) * c(0.125))) <= 1e-6);
    }

    #[test]
    fn single_mode_occupation() {
        let spec = LatticeSpec::full(1, Boundary::Dirichlet).unwrap();
        let n = number_operator(&spec).unwrap();
        let eps = 0.7;
        let p = GibbsParams::new(1.3, 0.0).unwrap();
        let g = gibbs_state(&n.scale(eps), &n, &p).unwrap();
        assert!((g.rho.expect(&n) - 1.0 / (1.0 + (1.3f64 * eps).exp())).abs() < 1e-10);
    }

    #[test]
    fn grand_potential_matches_spectral_sum() {
        let spec = LatticeSpec::full(4, Boundary::Periodic).unwrap();
        let h = hopping_hamiltonian(&spec).unwrap();
        let n = number_operator(&spec).unwrap();
        let p = GibbsParams::new(2.0, 0.8).unwrap();
        let g = gibbs_state(&h, &n, &p).unwrap();
        let k = h.matrix() - n.matrix() * c(0.8);
        let brute: f64 = linalg::HermitianEigen::new(&k).values.iter().map(|&x| (-2.0 * x).exp()).sum();
        assert!((g.beta_g + brute.ln()).abs() < 1e-9);
        assert!((g.rho.trace() - 1.0).abs() < 1e-10);
        assert!(g.min_eigenvalue > 0.0);
    }

    #[test]
    fn entropy_examples() {
        assert!((von_neumann_entropy(&diag(&[1.0, 0.0, 0.0, 0.0])).unwrap()).abs() < 1e-10);
        let mixed = DensityMatrix::maximally_mixed(16);
        assert!((von_neumann_entropy(&mixed).unwrap() - 4.0 * 2f64.ln()).abs() < 1e-10);
        let s = von_neumann_entropy(&diag(&[0.75, 0.25])).unwrap();
        assert!((s - (-0.75 * 0.75f64.ln() - 0.25 * 0.25f64.ln())).abs() < 1e-8);
        assert!((s - 0.5623).abs() < 1e-4);
    }

    #[test]
    fn relative_entropy_examples() {
        let r = diag(&[0.9, 0.1]);
        assert!(relative_entropy(&r, &r).unwrap().abs() < 1e-10);
        let d = relative_entropy(&r, &diag(&[0.5, 0.5])).unwrap();
        let expect = 0.9 * (0.9f64 / 0.5).ln() + 0.1 * (0.1f64 / 0.5).ln();
        assert!((d - expect).abs() < 1e-8);
        assert!((d - 0.3681).abs() < 1e-4);
    }

    #[test]
    fn support_violation_names_null_space() {
        let err = relative_entropy(&diag(&[0.5, 0.5]), &diag(&[1.0, 0.0])).unwrap_err();
        match err {
            Error::SupportViolation { dim, weight, .. } => {
                assert_eq!(dim, 1);
                assert!((weight - 0.5).abs() < 1e-12);
            }
            other => panic!("unexpected {other}"),
        }
        // contained support is fine
        assert!(relative_entropy(&diag(&[1.0, 0.0]), &diag(&[0.5, 0.5])).is_ok());
    }

    #[test]
    fn invalid_states_rejected() {
        assert!(DensityMatrix::new(CMatrix::from_diagonal(&DVector::from_vec(vec![c(1.2), c(-0.2)]))).is_err());
        assert!(DensityMatrix::new(CMatrix::from_diagonal(&DVector::from_vec(vec![c(0.6), c(0.6)]))).is_err());
        assert!(GibbsParams::new(0.0, 0.0).is_err());
        assert!(GibbsParams::new(f64::INFINITY, 0.0).is_err());
    }
}
