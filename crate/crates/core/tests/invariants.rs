//! Property tests for the structural invariants: unitarity and the cocycle
//! law, conservation of the state entropy, Klein positivity, gauge
//! invariance, Pauli bounds on the fast path and lossless CSV output.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qtherm::drive::{periodic_protocol, switch_on_protocol, KernelSpec, LinearTerm, Waveform};
use qtherm::fock::{annihilation_op, gauge_transform, hopping_hamiltonian, second_quantize, Boundary, LatticeSpec};
use qtherm::harness::output::{read_series, write_series_file};
use qtherm::harness::run::spearman;
use qtherm::harness::verify::random_state;
use qtherm::linalg::{self, CMatrix, C64};
use qtherm::observables::ProcessRecord;
use qtherm::propagator::{propagate, TimeDependentHamiltonian};
use qtherm::quadratic::fast::FastProcess;
use qtherm::quadratic::QuadraticModel;
use qtherm::thermo::{evolve_state, relative_entropy, von_neumann_entropy, GibbsParams};

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

fn driven(l: usize, xs: &[f64], periodic: bool) -> TimeDependentHamiltonian {
    let lattice = LatticeSpec::full(l, Boundary::Dirichlet).unwrap();
    let term = LinearTerm::from_one_body(hermitian(l, xs), &lattice).unwrap();
    let drive = if periodic {
        periodic_protocol(term, 0.0, 1.3, Waveform::Sin).unwrap()
    } else {
        switch_on_protocol(term, 0.0, 0.5).unwrap()
    };
    TimeDependentHamiltonian::new(hopping_hamiltonian(&lattice).unwrap(), drive, &lattice).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn propagator_is_unitary_and_composes(
        xs in prop::collection::vec(-1.0f64..1.0, 9),
        periodic in any::<bool>(),
        t in 0.2f64..2.0,
        frac in 0.05f64..0.95,
    ) {
        let h = driven(3, &xs, periodic);
        let tol = 1e-9;
        let u = propagate(&h, 0.0, t, tol).unwrap();
        prop_assert!(u.unitarity_defect() <= 1e-9);
        let mid = frac * t;
        let split = propagate(&h, mid, t, tol).unwrap().compose(&propagate(&h, 0.0, mid, tol).unwrap()).unwrap();
        prop_assert!(linalg::max_abs_diff(u.matrix(), split.matrix()) <= 10.0 * tol * t.max(1.0));
    }

    #[test]
    fn evolution_preserves_state_entropy(
        xs in prop::collection::vec(-1.0f64..1.0, 9),
        seed in any::<u64>(),
        t in 0.1f64..3.0,
    ) {
        let h = driven(3, &xs, true);
        let rho = random_state(&mut ChaCha8Rng::seed_from_u64(seed), 8);
        let u = propagate(&h, 0.0, t, 1e-9).unwrap();
        let s0 = von_neumann_entropy(&rho).unwrap();
        let s1 = von_neumann_entropy(&evolve_state(&rho, &u).unwrap()).unwrap();
        prop_assert!((s0 - s1).abs() <= 1e-9);
    }

    #[test]
    fn relative_entropy_is_nonnegative(seed in any::<u64>(), dim in 1usize..24) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_state(&mut rng, dim);
        let b = random_state(&mut rng, dim);
        prop_assert!(relative_entropy(&a, &b).unwrap() >= -1e-10);
        prop_assert!(relative_entropy(&a, &a).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn one_body_operators_are_gauge_invariant(
        xs in prop::collection::vec(-1.0f64..1.0, 16),
        tau in -3.0f64..3.0,
        site in 0usize..4,
    ) {
        let lattice = LatticeSpec::full(4, Boundary::Dirichlet).unwrap();
        let a = second_quantize(&lattice, &hermitian(4, &xs)).unwrap();
        let g = gauge_transform(&a, tau).unwrap();
        prop_assert!(linalg::max_abs_diff(g.matrix(), a.matrix()) <= 1e-12);
        // a annihilator picks up e^{−iτ}
        let c = annihilation_op(&lattice, site).unwrap();
        let gc = gauge_transform(&c, tau).unwrap();
        let expect = c.matrix() * C64::from_polar(1.0, -tau);
        prop_assert!(linalg::max_abs_diff(gc.matrix(), &expect) <= 1e-12);
    }

    #[test]
    fn fast_path_respects_pauli_bounds_and_charge(
        xs in prop::collection::vec(-1.0f64..1.0, 9),
        l in 8usize..16,
        beta in 0.3f64..3.0,
        t in 0.5f64..4.0,
    ) {
        let c0 = l / 2;
        let lattice = LatticeSpec::new(l, Boundary::Dirichlet, vec![c0 - 1, c0, c0 + 1]).unwrap();
        let v3 = hermitian(3, &xs);
        let v = CMatrix::from_fn(l, l, |i, j| {
            if (c0 - 1..=c0 + 1).contains(&i) && (c0 - 1..=c0 + 1).contains(&j) {
                v3[(i + 1 - c0, j + 1 - c0)]
            } else {
                C64::new(0.0, 0.0)
            }
        });
        // one-body form only: a dense Fock form would not fit in memory near the exact cap
        let term = LinearTerm::one_body_only(vec![KernelSpec::one_body(&v)], &lattice).unwrap().scale(0.5);
        let drive = periodic_protocol(term, 0.0, 2.0, Waveform::Sin).unwrap();
        let model = QuadraticModel::new(lattice, Some(drive), GibbsParams::new(beta, 0.0).unwrap()).unwrap();
        let mut fast = FastProcess::new(&model, 0.0, 1e-8, (-1.0, 1.0)).unwrap();
        let q0 = fast.record().unwrap().q;
        fast.advance_to(t).unwrap();
        let gamma = fast.full_correlation();
        prop_assert!(linalg::hermiticity_defect(gamma.matrix()) <= 1e-12);
        let occ = gamma.occupations();
        prop_assert!(occ[0] >= -1e-9 && occ[occ.len() - 1] <= 1.0 + 1e-9);
        prop_assert!((fast.record().unwrap().q - q0).abs() <= 1e-8);
    }

    #[test]
    fn spearman_is_a_rank_correlation(ys in prop::collection::vec(-1e3f64..1e3, 3..30)) {
        let xs: Vec<f64> = (0..ys.len()).map(|k| k as f64).collect();
        let r = spearman(&xs, &ys);
        if r.is_finite() {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
            let neg: Vec<f64> = ys.iter().map(|y| -y).collect();
            prop_assert!((spearman(&xs, &neg) + r).abs() <= 1e-12);
        }
        let cubed: Vec<f64> = xs.iter().map(|x| -x * x * x).collect();
        prop_assert!((spearman(&xs, &cubed) + 1.0).abs() <= 1e-12);
    }

    #[test]
    fn series_round_trips(values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 9)) {
        let rec = ProcessRecord {
            t: values[0],
            u: values[1],
            q: values[2],
            s: values[3],
            sdot: values[4],
            rel_s: values[5],
            work: values[6],
            g: values[7],
            d_probe: values[8],
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        write_series_file(&path, std::slice::from_ref(&rec)).unwrap();
        prop_assert_eq!(read_series(&path).unwrap(), vec![rec]);
    }
}
