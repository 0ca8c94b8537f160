//! The free-fermion path against the Fock-space oracle on small lattices:
//! `Γ_ij = ⟨a_i* a_j⟩` for Gibbs states and along driven evolutions.

use proptest::prelude::*;

use qtherm::drive::{switch_on_protocol, LinearTerm};
use qtherm::fock::{annihilation_op, creation_op, hopping_hamiltonian, number_operator, second_quantize, Boundary, LatticeSpec};
use qtherm::linalg::{self, CMatrix, C64};
use qtherm::propagator::{propagate, TimeDependentHamiltonian};
use qtherm::quadratic::fast::FastProcess;
use qtherm::quadratic::{correlation_trajectory, gibbs_correlation, QuadraticModel};
use qtherm::thermo::{evolve_state, gibbs_state, DensityMatrix, GibbsParams};

fn hermitian(l: usize, xs: &[f64]) -> CMatrix {
    let mut h = CMatrix::zeros(l, l);
    let mut it = xs.iter().copied().cycle();
    for i in 0..l {
        h[(i, i)] = C64::new(it.next().unwrap(), 0.0);
        for j in i + 1..l {
            let z = C64::new(it.next().unwrap(), it.next().unwrap());
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

/// `⟨a_i* a_j⟩` read off a Fock-space state.
fn fock_gamma(rho: &DensityMatrix, lattice: &LatticeSpec) -> CMatrix {
    let l = lattice.sites();
    let ad: Vec<_> = (0..l).map(|i| creation_op(lattice, i).unwrap()).collect();
    let a: Vec<_> = (0..l).map(|i| annihilation_op(lattice, i).unwrap()).collect();
    CMatrix::from_fn(l, l, |i, j| rho.expect_complex(&(ad[i].matrix() * a[j].matrix())))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gibbs_correlation_matches_fock_expectations(
        xs in prop::collection::vec(-1.5f64..1.5, 16),
        beta in 0.2f64..3.0,
        mu in -1.0f64..1.0,
    ) {
        let lattice = LatticeSpec::full(4, Boundary::Dirichlet).unwrap();
        let h = hermitian(4, &xs);
        let p = GibbsParams::new(beta, mu).unwrap();
        let n = number_operator(&lattice).unwrap();
        let rho = gibbs_state(&second_quantize(&lattice, &h).unwrap(), &n, &p).unwrap().rho;
        let gamma = gibbs_correlation(&h, &p).unwrap();
        prop_assert!(linalg::max_abs_diff(gamma.matrix(), &fock_gamma(&rho, &lattice)) < 1e-12);
    }
}

#[test]
fn driven_evolution_matches_fock_oracle() {
    let lattice = LatticeSpec::full(4, Boundary::Dirichlet).unwrap();
    let v = hermitian(4, &[0.3, -0.7, 0.2, 0.5, 0.1, -0.4, 0.6, 0.05, -0.2, 0.35]);
    let term = LinearTerm::from_one_body(v, &lattice).unwrap().scale(0.8);
    let drive = switch_on_protocol(term, 0.0, 0.4).unwrap();
    let p = GibbsParams::new(0.9, 0.25).unwrap();

    let h0 = hopping_hamiltonian(&lattice).unwrap();
    let n = number_operator(&lattice).unwrap();
    let h = TimeDependentHamiltonian::new(h0.clone(), drive.clone(), &lattice).unwrap();
    let rho0 = gibbs_state(&h0, &n, &p).unwrap().rho;

    let model = QuadraticModel::new(lattice.clone(), Some(drive), p).unwrap();
    let times: Vec<f64> = (0..=8).map(|k| 0.3 * k as f64).collect();
    let dense = correlation_trajectory(&model, &model.initial_state().unwrap(), &times, 1e-10).unwrap();
    let mut fast = FastProcess::new(&model, 0.0, 1e-10, (0.0, 1.0)).unwrap();

    for (k, &t) in times.iter().enumerate() {
        let u = propagate(&h, 0.0, t, 1e-10).unwrap();
        let oracle = fock_gamma(&evolve_state(&rho0, &u).unwrap(), &lattice);
        fast.advance_to(t).unwrap();
        let d_dense = linalg::max_abs_diff(dense[k].matrix(), &oracle);
        let d_fast = linalg::max_abs_diff(fast.full_correlation().matrix(), &oracle);
        assert!(d_dense < 1e-8, "t = {t}: dense one-body path off by {d_dense:e}");
        assert!(d_fast < 1e-8, "t = {t}: fast path off by {d_fast:e}");
    }
}
