//! Invariant suites run on top of a configured run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fock::{self, annihilation_op, creation_op, hopping_hamiltonian, number_operator, LatticeSpec};
use crate::linalg::{self, c, CMatrix, C64};
use crate::propagator::{self, heisenberg_evolve, TimeDependentHamiltonian};
use crate::quadratic::norm::{function_norm, ground_state};
use crate::thermo::{evolve_state, gibbs_state, relative_entropy, DensityMatrix};

use super::config::RunConfig;
use super::manifest::Verdict;
use super::run::{run, ProbeSet, RunResult};

/// Largest lattice for the anticommutator suite.
pub const CAR_MAX_SITES: usize = 8;
/// Largest Fock dimension for the Dyson cross-check.
pub const DYSON_MAX_DIM: usize = 256;
pub const UNITARITY_TOL: f64 = 1e-9;
pub const COCYCLE_TOL: f64 = 1e-7;
pub const DYSON_FLOOR: f64 = 1e-6;
pub const KLEIN_TOL: f64 = 1e-10;
pub const DUALITY_TOL: f64 = 1e-9;
pub const CAR_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Break unitarity of the propagator under test (fault injection).
    pub corrupt_propagator: bool,
    pub klein_pairs: usize,
    /// Largest random-state dimension for the Klein suite.
    pub klein_max_dim: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            corrupt_propagator: false,
            klein_pairs: 1000,
            klein_max_dim: 64,
        }
    }
}

/// Column-wise form of an operator with at most one nonzero per column
/// (true for ladder operators): `col[j] = Some((i, m_ij))`.
fn monomial_columns(m: &CMatrix) -> Option<Vec<Option<(usize, C64)>>> {
    let mut out = Vec::with_capacity(m.ncols());
    for j in 0..m.ncols() {
        let mut hit = None;
        for i in 0..m.nrows() {
            if m[(i, j)] != C64::new(0.0, 0.0) {
                if hit.is_some() {
                    return None;
                }
                hit = Some((i, m[(i, j)]));
            }
        }
        out.push(hit);
    }
    Some(out)
}

/// `max |({A, B} − δ·1)_kl|` for monomial `A`, `B`.
fn monomial_anticommutator_defect(a: &[Option<(usize, C64)>], b: &[Option<(usize, C64)>], delta: bool) -> f64 {
    let dim = a.len();
    let mut worst = 0.0f64;
    let mut col = vec![C64::new(0.0, 0.0); dim];
    for k in 0..dim {
        col.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        for (x, y) in [(a, b), (b, a)] {
            if let Some((m, v)) = y[k] {
                if let Some((n, w)) = x[m] {
                    col[n] += w * v;
                }
            }
        }
        if delta {
            col[k] -= C64::new(1.0, 0.0);
        }
        worst = col.iter().map(|z| z.norm()).fold(worst, f64::max);
    }
    worst
}

/// Worst deviation of `{a_i, a_j*} = δ_ij`, `{a_i, a_j} = 0` on `L` sites,
/// computed from the operator matrices.
pub fn car_defect(sites: usize) -> Result<f64> {
    let spec = LatticeSpec::full(sites, fock::Boundary::Dirichlet)?;
    let a: Vec<_> = (0..sites).map(|i| annihilation_op(&spec, i)).collect::<Result<_>>()?;
    let ad: Vec<_> = (0..sites).map(|i| creation_op(&spec, i)).collect::<Result<_>>()?;
    let cols = |ops: &[fock::Operator]| -> Option<Vec<_>> { ops.iter().map(|o| monomial_columns(o.matrix())).collect() };
    let (Some(ca), Some(cad)) = (cols(&a), cols(&ad)) else {
        // not monomial: fall back to dense products
        let dim = spec.fock_dim();
        let mut worst = 0.0f64;
        for i in 0..sites {
            for j in 0..sites {
                let expect = if i == j { linalg::identity(dim) } else { CMatrix::zeros(dim, dim) };
                worst = worst.max(linalg::max_abs_diff(
                    &linalg::anticommutator(a[i].matrix(), ad[j].matrix()),
                    &expect,
                ));
                worst = worst.max(linalg::max_abs(&linalg::anticommutator(a[i].matrix(), a[j].matrix())));
            }
        }
        return Ok(worst);
    };
    let mut worst = 0.0f64;
    for i in 0..sites {
        for j in 0..sites {
            worst = worst.max(monomial_anticommutator_defect(&ca[i], &cad[j], i == j));
            worst = worst.max(monomial_anticommutator_defect(&ca[i], &ca[j], false));
        }
    }
    Ok(worst)
}

/// A full-rank random density matrix `G G† / tr`.
pub fn random_state<R: Rng>(rng: &mut R, dim: usize) -> DensityMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let m = &g * g.adjoint();
    let tr = linalg::trace(&m).re;
    DensityMatrix::from_trusted(linalg::hermitian_part(&(m / c(tr))))
}

/// Smallest relative entropy over `pairs` random state pairs of dimension
/// up to `max_dim`.
pub fn klein_minimum(seed: u64, pairs: usize, max_dim: usize) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..pairs {
        let dim = rng.random_range(1..=max_dim);
        let a = random_state(&mut rng, dim);
        let b = random_state(&mut rng, dim);
        worst = worst.min(relative_entropy(&a, &b)?);
    }
    Ok(worst)
}

fn exact_suites(cfg: &RunConfig, opts: &VerifyOptions) -> Result<Vec<Verdict>> {
    let mut v = Vec::new();
    let lattice = cfg.lattice()?;
    let h0 = hopping_hamiltonian(&lattice)?;
    let n = number_operator(&lattice)?;
    let h = TimeDependentHamiltonian::new(h0.clone(), cfg.build_protocol(true)?, &lattice)?;
    let tol = cfg.integrator.tol;
    let s = cfg.t0();
    let t = s + (cfg.t_end() - s).min(2.0);
    let mid = s + 0.37 * (t - s);

    let mut u = propagator::propagate(&h, s, t, tol)?;
    if opts.corrupt_propagator {
        let broken = u.matrix() * c(1.001);
        u.corrupt(broken);
    }
    v.push(Verdict::at_most("propagator.unitarity", u.unitarity_defect(), UNITARITY_TOL));

    let split = propagator::propagate(&h, mid, t, tol)?.compose(&propagator::propagate(&h, s, mid, tol)?)?;
    v.push(Verdict::at_most(
        "propagator.cocycle",
        linalg::max_abs_diff(u.matrix(), split.matrix()),
        COCYCLE_TOL,
    ));

    if lattice.fock_dim() <= DYSON_MAX_DIM {
        let t_dyson = s + (t - s).min(1.0);
        let direct = propagator::propagate(&h, s, t_dyson, tol)?;
        let order = cfg.integrator.dyson_order.max(1);
        let ui = propagator::dyson_propagator(&h, s, t_dyson, order, 1e-12, None)?;
        let dyson = propagator::interaction_to_schrodinger(&ui, &h0, s, t_dyson)?;
        let bound = DYSON_FLOOR.max(10.0 * ui.est_error());
        v.push(Verdict::at_most(
            "propagator.dyson_vs_direct",
            linalg::max_abs_diff(dyson.matrix(), direct.matrix()),
            bound,
        ));
    }

    // expectations in both pictures
    let rho0 = gibbs_state(&h0, &n, &cfg.gibbs)?.rho;
    let rho_t = evolve_state(&rho0, &u)?;
    let mut duality = 0.0f64;
    for a in ProbeSet::for_config(cfg)?.fock_operators(&lattice)? {
        let heis = heisenberg_evolve(&a, &u)?;
        duality = duality.max((rho_t.expect(&a) - rho0.expect(&heis)).abs());
    }
    v.push(Verdict::at_most("observables.schrodinger_heisenberg", duality, DUALITY_TOL));
    Ok(v)
}

/// Runs the configured process and every enabled invariant suite.
pub fn run_verify(cfg: &RunConfig, opts: &VerifyOptions) -> Result<RunResult> {
    let mut result = run(cfg)?;
    let mut v = Vec::new();
    let car_sites = cfg.lattice.sites.min(CAR_MAX_SITES);
    v.push(Verdict::at_most("fock.car", car_defect(car_sites)?, CAR_TOL));
    let klein = klein_minimum(cfg.seed, opts.klein_pairs, opts.klein_max_dim)?;
    v.push(Verdict::at_least("thermo.klein", klein, -KLEIN_TOL));
    let ho = function_norm(|x| c(ground_state(x[0])), 1)?;
    v.push(Verdict::at_most("norm.harmonic_ground_state", (ho.value - 1.0).abs(), 0.01));
    if cfg.path.runs_exact() {
        v.extend(exact_suites(cfg, opts)?);
    }
    result.manifest.verdicts.extend(v);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn car_small() {
        assert!(car_defect(3).unwrap() <= CAR_TOL);
    }

    #[test]
    fn monomial_defect_sees_a_wrong_sign() {
        let spec = LatticeSpec::full(2, fock::Boundary::Dirichlet).unwrap();
        let a0 = monomial_columns(annihilation_op(&spec, 0).unwrap().matrix()).unwrap();
        let a1 = annihilation_op(&spec, 1).unwrap().matrix().clone();
        // drop the Jordan–Wigner string from a_1
        let bosonic = a1.map(|z| C64::new(z.re.abs(), 0.0));
        let b = monomial_columns(&bosonic).unwrap();
        assert!(monomial_anticommutator_defect(&a0, &b, false) > 0.5);
        assert_eq!(monomial_anticommutator_defect(&a0, &monomial_columns(&a1).unwrap(), false), 0.0);
    }

    #[test]
    fn klein_on_a_few_pairs() {
        assert!(klein_minimum(1, 20, 8).unwrap() >= 0.0);
    }
}
