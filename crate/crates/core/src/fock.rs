//! Occupation-number Fock space of spinless fermions on a 1-D chain.
//!
//! Basis index `k ∈ [0, 2^L)` encodes the occupation bitstring: bit `j` of
//! `k` is the occupancy of site `j`. Creation and annihilation operators are
//! realized with a Jordan–Wigner string over sites of *lower* index, so
//!
//! ```text
//! a_j* |k⟩ = (−1)^{#occupied sites below j} |k + 2^j⟩   (bit j of k empty)
//! ```
//!
//! Everything on this path is dense; the lattice is capped at
//! [`MAX_EXACT_SITES`] sites.

use std::fmt::Write as _;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, C64, ZERO};

/// Hard cap on the exact path: `2^14 = 16384` basis states.
pub const MAX_EXACT_SITES: usize = 14;

/// Drift below this is accepted as Hermitian without modification.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Drift between [`HERMITIAN_TOL`] and this is symmetrized away.
pub const HERMITIAN_REPAIR_TOL: f64 = 1e-8;

/// Boundary condition for the discrete Laplacian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Ghost sites held at zero: every diagonal entry is 2.
    Dirichlet,
    /// Graph Laplacian of the open chain: diagonal entry is the site degree.
    Neumann,
    /// Graph Laplacian of the ring.
    Periodic,
}

/// A finite chain `Λ = {0,…,L−1}` together with a local region `Λ₀ ⊆ Λ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    sites: usize,
    boundary: Boundary,
    local_region: Vec<usize>,
}

impl LatticeSpec {
    pub fn new(sites: usize, boundary: Boundary, local_region: Vec<usize>) -> Result<Self> {
        if sites == 0 {
            return Err(Error::InvalidLattice("need at least one site".into()));
        }
        if local_region.is_empty() {
            return Err(Error::InvalidLattice("local region must be non-empty".into()));
        }
        for (n, &s) in local_region.iter().enumerate() {
            if s >= sites {
                return Err(Error::SiteOutOfRange { site: s, sites });
            }
            if local_region[..n].contains(&s) {
                return Err(Error::InvalidLattice(format!("site {s} repeated in local region")));
            }
        }
        let mut local_region = local_region;
        local_region.sort_unstable();
        Ok(Self {
            sites,
            boundary,
            local_region,
        })
    }

    /// Chain whose local region is the whole lattice.
    pub fn full(sites: usize, boundary: Boundary) -> Result<Self> {
        Self::new(sites, boundary, (0..sites).collect())
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn local_region(&self) -> &[usize] {
        &self.local_region
    }

    pub fn contains_local(&self, site: usize) -> bool {
        self.local_region.binary_search(&site).is_ok()
    }

    /// `2^L`; only meaningful on the exact path.
    pub fn fock_dim(&self) -> usize {
        1usize << self.sites
    }

    /// Rejects lattices beyond the exact-path cap.
    pub fn require_exact(&self) -> Result<()> {
        if self.sites > MAX_EXACT_SITES {
            return Err(Error::LatticeTooLarge {
                requested: self.sites,
                max: MAX_EXACT_SITES,
            });
        }
        Ok(())
    }

    pub(crate) fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.sites {
            Err(Error::SiteOutOfRange { site, sites: self.sites })
        } else {
            Ok(())
        }
    }

    /// The lattice spanned by the local region alone.
    pub fn local_lattice(&self) -> Self {
        Self {
            sites: self.local_region.len(),
            boundary: Boundary::Neumann,
            local_region: (0..self.local_region.len()).collect(),
        }
    }
}

/// Occupation-number basis with its particle-number sectors.
#[derive(Clone, Debug)]
pub struct FockBasis {
    sites: usize,
    sectors: Vec<Vec<usize>>,
}

impl FockBasis {
    pub fn new(sites: usize) -> Self {
        let dim = 1usize << sites;
        let mut sectors = vec![Vec::new(); sites + 1];
        for k in 0..dim {
            sectors[k.count_ones() as usize].push(k);
        }
        Self { sites, sectors }
    }

    pub fn dim(&self) -> usize {
        1usize << self.sites
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn occupation(&self, index: usize, site: usize) -> bool {
        index >> site & 1 == 1
    }

    pub fn particle_number(&self, index: usize) -> usize {
        index.count_ones() as usize
    }

    /// Basis indices with exactly `n` particles, ascending.
    pub fn sector(&self, n: usize) -> &[usize] {
        &self.sectors[n]
    }

    pub fn sectors(&self) -> &[Vec<usize>] {
        &self.sectors
    }

    pub fn bitstring(&self, index: usize) -> String {
        (0..self.sites).map(|j| if self.occupation(index, j) { '1' } else { '0' }).collect()
    }
}

/// Dense operator on a Fock space, carrying a Hermiticity certificate.
///
/// Non-Hermitian operators (creation and annihilation operators, products)
/// use the same carrier with `hermitian == false`.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    matrix: CMatrix,
    hermitian: bool,
}

impl Operator {
    /// A general (not certified Hermitian) square operator.
    pub fn new(matrix: CMatrix) -> Self {
        assert!(matrix.is_square(), "operators must be square");
        Self { matrix, hermitian: false }
    }

    /// Certifies Hermiticity. Drift up to `1e-8` is symmetrized away;
    /// anything larger is an error.
    pub fn hermitian(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if !linalg::all_finite(&matrix) {
            return Err(Error::NonFinite("operator entries".into()));
        }
        let drift = linalg::hermiticity_defect(&matrix);
        let matrix = if drift <= HERMITIAN_TOL {
            matrix
        } else if drift <= HERMITIAN_REPAIR_TOL {
            linalg::hermitian_part(&matrix)
        } else {
            return Err(Error::NotHermitian(drift));
        };
        Ok(Self { matrix, hermitian: true })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: linalg::identity(dim),
            hermitian: true,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(dim, dim),
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
        }
    }

    /// Real scalar multiple; keeps the certificate.
    pub fn scale(&self, factor: f64) -> Self {
        Self {
            matrix: &self.matrix * c(factor),
            hermitian: self.hermitian,
        }
    }

    /// Re-certifies an operator that is Hermitian by construction.
    pub fn certify(self) -> Result<Self> {
        Self::hermitian(self.matrix)
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim(),
            })
        } else {
            Ok(())
        }
    }

    /// Writes `row col re im` lines (1-based, nonzero entries only) with a
    /// matrix-market style size header.
    pub fn debug_dump(&self) -> String {
        let n = self.dim();
        let nnz = self.matrix.iter().filter(|z| z.norm() > 0.0).count();
        let mut out = String::new();
        let _ = writeln!(out, "%%MatrixMarket matrix coordinate complex general");
        let _ = writeln!(out, "{n} {n} {nnz}");
        for j in 0..n {
            for i in 0..n {
                let z = self.matrix[(i, j)];
                if z.norm() > 0.0 {
                    let _ = writeln!(out, "{} {} {:.17e} {:.17e}", i + 1, j + 1, z.re, z.im);
                }
            }
        }
        out
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn mul(self, rhs: &'a Operator) -> Operator {
        Operator::new(&self.matrix * &rhs.matrix)
    }
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn add(self, rhs: &'a Operator) -> Operator {
        Operator {
            matrix: &self.matrix + &rhs.matrix,
            hermitian: self.hermitian && rhs.hermitian,
        }
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn sub(self, rhs: &'a Operator) -> Operator {
        Operator {
            matrix: &self.matrix - &rhs.matrix,
            hermitian: self.hermitian && rhs.hermitian,
        }
    }
}

/// One factor in a product of fermionic operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ladder {
    Create(usize),
    Annihilate(usize),
}

#[inline]
fn jw_sign(state: usize, site: usize) -> f64 {
    if (state & ((1usize << site) - 1)).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Applies `ops[0] ops[1] … ops[n−1]` (rightmost first) to basis state
/// `state`, returning the image state and its sign, or `None` if annihilated.
pub fn apply_ladder(ops: &[Ladder], state: usize) -> Option<(usize, f64)> {
    let mut s = state;
    let mut sign = 1.0;
    for op in ops.iter().rev() {
        match *op {
            Ladder::Create(j) => {
                if s >> j & 1 == 1 {
                    return None;
                }
                sign *= jw_sign(s, j);
                s |= 1 << j;
            }
            Ladder::Annihilate(j) => {
                if s >> j & 1 == 0 {
                    return None;
                }
                sign *= jw_sign(s, j);
                s &= !(1 << j);
            }
        }
    }
    Some((s, sign))
}

/// Matrix of a product of ladder operators on the full Fock space.
pub fn ladder_product(spec: &LatticeSpec, ops: &[Ladder]) -> Result<Operator> {
    spec.require_exact()?;
    for op in ops {
        match *op {
            Ladder::Create(j) | Ladder::Annihilate(j) => spec.check_site(j)?,
        }
    }
    let dim = spec.fock_dim();
    let mut m = CMatrix::zeros(dim, dim);
    for k in 0..dim {
        if let Some((k2, s)) = apply_ladder(ops, k) {
            m[(k2, k)] += c(s);
        }
    }
    Ok(Operator::new(m))
}

/// `a_site*` in the Jordan–Wigner realization.
pub fn creation_op(spec: &LatticeSpec, site: usize) -> Result<Operator> {
    spec.check_site(site)?;
    ladder_product(spec, &[Ladder::Create(site)])
}

/// `a_site`, the adjoint of [`creation_op`].
pub fn annihilation_op(spec: &LatticeSpec, site: usize) -> Result<Operator> {
    spec.check_site(site)?;
    ladder_product(spec, &[Ladder::Annihilate(site)])
}

/// Single-particle discrete Laplacian `−Δ` for the chain.
pub fn single_particle_laplacian(spec: &LatticeSpec) -> nalgebra::DMatrix<f64> {
    let l = spec.sites();
    let mut h = nalgebra::DMatrix::<f64>::zeros(l, l);
    let mut edges: Vec<(usize, usize)> = (0..l.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    if spec.boundary() == Boundary::Periodic && l > 2 {
        edges.push((l - 1, 0));
    }
    for &(i, j) in &edges {
        h[(i, i)] += 1.0;
        h[(j, j)] += 1.0;
        h[(i, j)] -= 1.0;
        h[(j, i)] -= 1.0;
    }
    if spec.boundary() == Boundary::Dirichlet {
        // ghost neighbours at −1 and L
        h[(0, 0)] += 1.0;
        h[(l - 1, l - 1)] += 1.0;
    }
    h
}

/// Second quantization `Σ_ij h_ij a_i* a_j` of a one-body matrix.
pub fn second_quantize(spec: &LatticeSpec, h: &CMatrix) -> Result<Operator> {
    spec.require_exact()?;
    let l = spec.sites();
    if h.nrows() != l || h.ncols() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            found: h.nrows(),
        });
    }
    let dim = spec.fock_dim();
    let mut m = CMatrix::zeros(dim, dim);
    for k in 0..dim {
        for i in 0..l {
            for j in 0..l {
                let hij = h[(i, j)];
                if hij == ZERO {
                    continue;
                }
                if let Some((k2, s)) = apply_ladder(&[Ladder::Create(i), Ladder::Annihilate(j)], k) {
                    m[(k2, k)] += hij * s;
                }
            }
        }
    }
    if linalg::hermiticity_defect(h) <= HERMITIAN_TOL {
        Operator::hermitian(m)
    } else {
        Ok(Operator::new(m))
    }
}

/// `H₀ = Σ_ij (−Δ)_ij a_i* a_j` with the lattice's boundary condition.
pub fn hopping_hamiltonian(spec: &LatticeSpec) -> Result<Operator> {
    let h = single_particle_laplacian(spec).map(c);
    second_quantize(spec, &h)
}

/// `N`: diagonal with entry `popcount(k)`.
pub fn number_operator(spec: &LatticeSpec) -> Result<Operator> {
    spec.require_exact()?;
    let dim = spec.fock_dim();
    let diag = nalgebra::DVector::from_fn(dim, |k, _| c(k.count_ones() as f64));
    Ok(Operator {
        matrix: CMatrix::from_diagonal(&diag),
        hermitian: true,
    })
}

/// `(−1)^N`.
pub fn parity_operator(spec: &LatticeSpec) -> Result<Operator> {
    spec.require_exact()?;
    let dim = spec.fock_dim();
    let diag = nalgebra::DVector::from_fn(dim, |k, _| c(if k.count_ones() % 2 == 0 { 1.0 } else { -1.0 }));
    Ok(Operator {
        matrix: CMatrix::from_diagonal(&diag),
        hermitian: true,
    })
}

fn fock_sites_of(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("dimension {dim} is not a Fock-space dimension")));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// `e^{iτN} A e^{−iτN}`: entry `(i, j)` picks up `e^{iτ(n_i − n_j)}`.
pub fn gauge_transform(a: &Operator, tau: f64) -> Result<Operator> {
    fock_sites_of(a.dim())?;
    let n = a.dim();
    let mut m = a.matrix.clone();
    for j in 0..n {
        let nj = j.count_ones() as i64;
        for i in 0..n {
            let dn = i.count_ones() as i64 - nj;
            if dn != 0 {
                m[(i, j)] *= C64::from_polar(1.0, tau * dn as f64);
            }
        }
    }
    Ok(Operator {
        matrix: m,
        hermitian: a.hermitian,
    })
}

/// `‖[A, N]‖_max`.
pub fn charge_commutator_norm(a: &Operator) -> f64 {
    let n = a.dim();
    let mut worst = 0.0_f64;
    for j in 0..n {
        let nj = j.count_ones() as f64;
        for i in 0..n {
            let dn = nj - i.count_ones() as f64;
            if dn != 0.0 {
                worst = worst.max((a.matrix[(i, j)] * dn).norm());
            }
        }
    }
    worst
}

/// Gauge invariance, operationalized as `‖[A, N]‖_max ≤ tol`.
pub fn is_gauge_invariant(a: &Operator, tol: f64) -> bool {
    charge_commutator_norm(a) <= tol
}

/// Sign picked up by the product representing `|k⟩⟨l|` on the sites listed in
/// `sites` (ascending), acting on the full basis state `state`.
fn monomial_sign(k: usize, l: usize, sites: &[usize], state: usize) -> Option<(usize, f64)> {
    let mut ops = Vec::with_capacity(sites.len());
    for (pos, &site) in sites.iter().enumerate() {
        let kb = k >> pos & 1;
        let lb = l >> pos & 1;
        match (kb, lb) {
            (1, 0) => ops.push(Ladder::Create(site)),
            (0, 1) => ops.push(Ladder::Annihilate(site)),
            _ => {}
        }
    }
    apply_ladder(&ops, state)
}

fn local_bits(state: usize, sites: &[usize]) -> usize {
    sites.iter().enumerate().fold(0, |acc, (pos, &s)| acc | ((state >> s & 1) << pos))
}

fn replace_local_bits(state: usize, sites: &[usize], bits: usize) -> usize {
    sites.iter().enumerate().fold(state, |acc, (pos, &s)| {
        let cleared = acc & !(1 << s);
        cleared | ((bits >> pos & 1) << s)
    })
}

/// Largest modulus among parity-odd matrix elements of a local operator.
fn odd_part_size(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for l in 0..n {
        for k in 0..n {
            if (k.count_ones() + l.count_ones()) % 2 == 1 {
                worst = worst.max(a[(k, l)].norm());
            }
        }
    }
    worst
}

/// Extends an even-parity operator on `Fock(Λ₀)` to `Fock(Λ)`.
///
/// The local Fock space orders the sites of `Λ₀` ascending; each matrix unit
/// `|k⟩⟨l|` is identified with the corresponding normal product of ladder
/// operators, which is then re-expressed on the full chain. For even
/// operators this is a *-homomorphism; odd operators are rejected.
pub fn embed_local(a_local: &Operator, spec: &LatticeSpec) -> Result<Operator> {
    spec.require_exact()?;
    let sites = spec.local_region();
    let ldim = 1usize << sites.len();
    a_local.check_dim(ldim)?;
    let odd = odd_part_size(a_local.matrix());
    if odd > HERMITIAN_TOL {
        return Err(Error::OddParity(odd));
    }
    let local_positions: Vec<usize> = (0..sites.len()).collect();
    let dim = spec.fock_dim();
    let mut m = CMatrix::zeros(dim, dim);
    for state in 0..dim {
        let l = local_bits(state, sites);
        for k in 0..ldim {
            let akl = a_local.matrix[(k, l)];
            if akl == ZERO {
                continue;
            }
            // sign of the local monomial's (k, l) entry
            let (_, s_loc) = monomial_sign(k, l, &local_positions, l).expect("monomial maps l to k by construction");
            let (target, s_glob) = monomial_sign(k, l, sites, state).expect("monomial maps l to k by construction");
            m[(target, state)] += akl * (s_loc * s_glob);
        }
    }
    Ok(Operator {
        matrix: m,
        hermitian: a_local.hermitian,
    })
}

/// Even part of the normalized partial trace of `a` onto `Fock(Λ₀)`, the
/// left inverse of [`embed_local`].
pub fn restrict_local(a: &Operator, spec: &LatticeSpec) -> Result<Operator> {
    spec.require_exact()?;
    a.check_dim(spec.fock_dim())?;
    let sites = spec.local_region();
    let ldim = 1usize << sites.len();
    let local_positions: Vec<usize> = (0..sites.len()).collect();
    let complement: Vec<usize> = (0..spec.sites()).filter(|s| !spec.contains_local(*s)).collect();
    let env_dim = 1usize << complement.len();
    let mut m = CMatrix::zeros(ldim, ldim);
    for l in 0..ldim {
        for k in 0..ldim {
            if (k.count_ones() + l.count_ones()) % 2 == 1 {
                continue;
            }
            let (_, s_loc) = monomial_sign(k, l, &local_positions, l).expect("valid monomial");
            let mut acc = ZERO;
            for env in 0..env_dim {
                let base = replace_local_bits(0, &complement, env);
                let state = replace_local_bits(base, sites, l);
                let (target, s_glob) = monomial_sign(k, l, sites, state).expect("valid monomial");
                acc += a.matrix[(target, state)] * (s_loc * s_glob);
            }
            m[(k, l)] = acc / env_dim as f64;
        }
    }
    Ok(Operator {
        matrix: m,
        hermitian: a.hermitian,
    })
}

/// Membership in the CAR algebra of `Λ₀`: the even part of `a` commutes and
/// the odd part anticommutes with every `a_j`, `j ∉ Λ₀`.
pub fn is_local(a: &Operator, spec: &LatticeSpec, tol: f64) -> Result<bool> {
    Ok(locality_defect(a, spec)? <= tol)
}

/// Largest graded commutator of `a` with ladder operators outside `Λ₀`.
pub fn locality_defect(a: &Operator, spec: &LatticeSpec) -> Result<f64> {
    spec.require_exact()?;
    a.check_dim(spec.fock_dim())?;
    let p = parity_operator(spec)?;
    let pap = p.matrix() * a.matrix() * p.matrix();
    let even = (a.matrix() + &pap) * c(0.5);
    let odd = (a.matrix() - &pap) * c(0.5);
    let mut worst = 0.0_f64;
    for j in 0..spec.sites() {
        if spec.contains_local(j) {
            continue;
        }
        let aj = annihilation_op(spec, j)?;
        let ajm = aj.matrix();
        worst = worst.max(linalg::max_abs(&linalg::commutator(&even, ajm)));
        worst = worst.max(linalg::max_abs(&linalg::anticommutator(&odd, ajm)));
    }
    Ok(worst)
}

/// Sector-wise spectral decomposition when `a` commutes with `N`, dense
/// otherwise.
pub fn spectral(a: &CMatrix) -> linalg::BlockEigen {
    let n = a.nrows();
    if n > 1 && n.is_power_of_two() {
        let op = Operator::new(a.clone());
        if charge_commutator_norm(&op) <= 1e-13 {
            let basis = FockBasis::new(n.trailing_zeros() as usize);
            return linalg::BlockEigen::from_blocks(a, basis.sectors().to_vec());
        }
    }
    linalg::BlockEigen::dense(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(l: usize) -> LatticeSpec {
        LatticeSpec::full(l, Boundary::Dirichlet).unwrap()
    }

    #[test]
    fn single_mode_creation_matrix() {
        let spec = chain(1);
        let ad = creation_op(&spec, 0).unwrap();
        let expect = CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, c(1.0), ZERO]);
        assert_eq!(ad.matrix(), &expect);
        let a = annihilation_op(&spec, 0).unwrap();
        let anti = linalg::anticommutator(a.matrix(), ad.matrix());
        assert_eq!(anti, linalg::identity(2));
    }

    #[test]
    fn car_relations_two_sites_exact() {
        let spec = chain(2);
        for i in 0..2 {
            for j in 0..2 {
                let ai = annihilation_op(&spec, i).unwrap();
                let aj = annihilation_op(&spec, j).unwrap();
                let ajd = creation_op(&spec, j).unwrap();
                let expect = if i == j { linalg::identity(4) } else { CMatrix::zeros(4, 4) };
                assert_eq!(
                    linalg::max_abs_diff(&linalg::anticommutator(ai.matrix(), ajd.matrix()), &expect),
                    0.0
                );
                assert_eq!(linalg::max_abs(&linalg::anticommutator(ai.matrix(), aj.matrix())), 0.0);
            }
        }
    }

    #[test]
    fn creation_operators_anticommute_l4() {
        let spec = chain(4);
        let a1 = creation_op(&spec, 1).unwrap();
        let a3 = creation_op(&spec, 3).unwrap();
        let lhs = (&a1 * &a3).into_matrix();
        let rhs = (&a3 * &a1).into_matrix() * c(-1.0);
        assert_eq!(linalg::max_abs_diff(&lhs, &rhs), 0.0);
        assert!(linalg::max_abs(&lhs) > 0.5);
    }

    #[test]
    fn site_out_of_range_is_rejected() {
        let spec = chain(3);
        assert!(matches!(creation_op(&spec, 3), Err(Error::SiteOutOfRange { .. })));
    }

    #[test]
    fn lattice_spec_validation() {
        assert!(LatticeSpec::new(0, Boundary::Dirichlet, vec![0]).is_err());
        assert!(LatticeSpec::new(3, Boundary::Dirichlet, vec![]).is_err());
        assert!(LatticeSpec::new(3, Boundary::Dirichlet, vec![1, 1]).is_err());
        assert!(LatticeSpec::new(3, Boundary::Dirichlet, vec![3]).is_err());
        let s = LatticeSpec::new(15, Boundary::Periodic, vec![0]).unwrap();
        assert!(matches!(s.require_exact(), Err(Error::LatticeTooLarge { requested: 15, max: 14 })));
    }

    #[test]
    fn fock_basis_sectors_are_binomial() {
        let b = FockBasis::new(6);
        let total: usize = b.sectors().iter().map(Vec::len).sum();
        assert_eq!(total, 64);
        let binom = [1, 6, 15, 20, 15, 6, 1];
        for (n, s) in b.sectors().iter().enumerate() {
            assert_eq!(s.len(), binom[n]);
        }
        assert_eq!(b.bitstring(0b101), "101000");
    }

    #[test]
    fn one_site_laplacian_by_boundary() {
        let h = |b| single_particle_laplacian(&LatticeSpec::full(1, b).unwrap())[(0, 0)];
        assert_eq!(h(Boundary::Dirichlet), 2.0);
        assert_eq!(h(Boundary::Neumann), 0.0);
        assert_eq!(h(Boundary::Periodic), 0.0);
    }

    #[test]
    fn three_cycle_spectrum() {
        let spec = LatticeSpec::full(3, Boundary::Periodic).unwrap();
        let mut ev: Vec<f64> = single_particle_laplacian(&spec)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip([0.0, 3.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hopping_hamiltonian_single_particle_block_is_laplacian() {
        for b in [Boundary::Dirichlet, Boundary::Neumann, Boundary::Periodic] {
            let spec = LatticeSpec::full(4, b).unwrap();
            let h0 = hopping_hamiltonian(&spec).unwrap();
            let lap = single_particle_laplacian(&spec);
            for i in 0..4 {
                for j in 0..4 {
                    let z = h0.matrix()[(1 << i, 1 << j)];
                    assert!((z - c(lap[(i, j)])).norm() < 1e-14);
                }
            }
            let n = number_operator(&spec).unwrap();
            assert!(linalg::max_abs(&linalg::commutator(h0.matrix(), n.matrix())) <= 1e-12);
        }
    }

    #[test]
    fn number_operator_from_ladders() {
        let spec = chain(3);
        let n = number_operator(&spec).unwrap();
        let mut sum = CMatrix::zeros(8, 8);
        for i in 0..3 {
            sum += (&creation_op(&spec, i).unwrap() * &annihilation_op(&spec, i).unwrap()).into_matrix();
        }
        assert!(linalg::max_abs_diff(&sum, n.matrix()) <= 1e-12);
        let two = number_operator(&chain(2)).unwrap();
        let d: Vec<f64> = two.matrix().diagonal().iter().map(|z| z.re).collect();
        assert_eq!(d, vec![0.0, 1.0, 1.0, 2.0]);
    }

    #[test]
    fn exponential_of_number_operator_is_unimodular_diagonal() {
        let spec = chain(3);
        let n = number_operator(&spec).unwrap();
        let u = linalg::expm_hermitian(n.matrix(), -0.7);
        for i in 0..8 {
            for j in 0..8 {
                if i == j {
                    assert!((u[(i, i)].norm() - 1.0).abs() < 1e-14);
                } else {
                    assert!(u[(i, j)].norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn gauge_transform_examples() {
        let spec = chain(3);
        let n = number_operator(&spec).unwrap();
        assert_eq!(gauge_transform(&n, 0.9).unwrap(), n);
        let ad = creation_op(&spec, 1).unwrap();
        let g = gauge_transform(&ad, 0.4).unwrap();
        let expect = ad.matrix() * C64::from_polar(1.0, 0.4);
        assert!(linalg::max_abs_diff(g.matrix(), &expect) <= 1e-12);
        let hop = &creation_op(&spec, 0).unwrap() * &annihilation_op(&spec, 1).unwrap();
        assert!(linalg::max_abs_diff(gauge_transform(&hop, 1.3).unwrap().matrix(), hop.matrix()) <= 1e-12);
    }

    #[test]
    fn gauge_invariance_classification() {
        let spec = chain(3);
        let hop = &creation_op(&spec, 0).unwrap() * &annihilation_op(&spec, 1).unwrap();
        assert!(is_gauge_invariant(&hop, 1e-12));
        assert!(!is_gauge_invariant(&creation_op(&spec, 0).unwrap(), 1e-12));
        assert!(is_gauge_invariant(&hopping_hamiltonian(&spec).unwrap(), 1e-12));
    }

    #[test]
    fn embed_identity_and_number_operator() {
        let spec = LatticeSpec::new(3, Boundary::Dirichlet, vec![0, 2]).unwrap();
        let id = embed_local(&Operator::identity(4), &spec).unwrap();
        assert_eq!(id.matrix(), &linalg::identity(8));
        let local = spec.local_lattice();
        let n0_local = &creation_op(&local, 0).unwrap() * &annihilation_op(&local, 0).unwrap();
        let embedded = embed_local(&n0_local, &spec).unwrap();
        let n0 = &creation_op(&spec, 0).unwrap() * &annihilation_op(&spec, 0).unwrap();
        assert!(linalg::max_abs_diff(embedded.matrix(), n0.matrix()) == 0.0);
    }

    #[test]
    fn embed_hopping_across_gap_keeps_string() {
        // Λ₀ = {0, 2}: local a_0* a_1 must become a_0* a_2 including the n_1 string.
        let spec = LatticeSpec::new(3, Boundary::Dirichlet, vec![0, 2]).unwrap();
        let local = spec.local_lattice();
        let hop_local = &creation_op(&local, 0).unwrap() * &annihilation_op(&local, 1).unwrap();
        let embedded = embed_local(&hop_local, &spec).unwrap();
        let hop = &creation_op(&spec, 0).unwrap() * &annihilation_op(&spec, 2).unwrap();
        assert!(linalg::max_abs_diff(embedded.matrix(), hop.matrix()) <= 1e-15);
        let back = restrict_local(&embedded, &spec).unwrap();
        assert!(linalg::max_abs_diff(back.matrix(), hop_local.matrix()) <= 1e-15);
    }

    #[test]
    fn embed_rejects_odd_operator() {
        let spec = LatticeSpec::new(3, Boundary::Dirichlet, vec![1]).unwrap();
        let a = annihilation_op(&spec.local_lattice(), 0).unwrap();
        assert!(matches!(embed_local(&a, &spec), Err(Error::OddParity(_))));
    }

    #[test]
    fn locality_of_ladder_operators() {
        let spec = LatticeSpec::new(4, Boundary::Dirichlet, vec![1, 2]).unwrap();
        let a1 = annihilation_op(&spec, 1).unwrap();
        let probe = &a1 + &a1.adjoint();
        assert!(is_local(&probe, &spec, 1e-12).unwrap());
        let n3 = &creation_op(&spec, 3).unwrap() * &annihilation_op(&spec, 3).unwrap();
        assert!(!is_local(&n3, &spec, 1e-12).unwrap());
    }

    #[test]
    fn debug_dump_lists_nonzeros() {
        let spec = chain(1);
        let dump = creation_op(&spec, 0).unwrap().debug_dump();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines[1], "2 2 1");
        assert!(lines[2].starts_with("2 1 1.0"));
    }

    #[test]
    fn hermitian_certificate_repairs_small_drift() {
        let mut m = linalg::identity(2);
        m[(0, 1)] = C64::new(1e-10, 0.0);
        let op = Operator::hermitian(m.clone()).unwrap();
        assert!(linalg::hermiticity_defect(op.matrix()) == 0.0);
        m[(0, 1)] = C64::new(1e-6, 0.0);
        assert!(matches!(Operator::hermitian(m), Err(Error::NotHermitian(_))));
    }
}
