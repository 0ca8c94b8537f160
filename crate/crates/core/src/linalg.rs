//! Dense complex linear algebra shared by the exact and quadratic paths.
//!
//! All matrix functions go through the Hermitian spectral decomposition: for
//! a Hermitian `A = V diag(a) V†`, `f(A) = V diag(f(a)) V†`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

/// `‖A − A†‖_max`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(A + A†)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Spectral decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// Decomposes the Hermitian part of `m`; callers are responsible for
    /// certifying Hermiticity beforehand.
    pub fn new(m: &CMatrix) -> Self {
        let n = m.nrows();
        if n == 0 {
            return Self {
                values: DVector::zeros(0),
                vectors: CMatrix::zeros(0, 0),
            };
        }
        let eig = hermitian_part(m).symmetric_eigen();
        Self {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `V diag(f(a)) V†`.
    pub fn apply<F: Fn(f64) -> C64>(&self, f: F) -> CMatrix {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fj = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// `e^{−iθA}`.
    pub fn unitary(&self, theta: f64) -> CMatrix {
        self.apply(|a| C64::from_polar(1.0, -theta * a))
    }
}

/// Spectral decomposition of a Hermitian matrix that is block diagonal with
/// respect to a partition of the basis (particle-number sectors, typically).
#[derive(Clone, Debug)]
pub struct BlockEigen {
    dim: usize,
    blocks: Vec<(Vec<usize>, HermitianEigen)>,
}

impl BlockEigen {
    /// Single block covering everything.
    pub fn dense(m: &CMatrix) -> Self {
        let n = m.nrows();
        Self {
            dim: n,
            blocks: vec![((0..n).collect(), HermitianEigen::new(m))],
        }
    }

    /// Decomposes each diagonal block `m[I, I]`; entries outside the blocks
    /// are assumed to vanish.
    pub fn from_blocks(m: &CMatrix, partition: Vec<Vec<usize>>) -> Self {
        let blocks = partition
            .into_iter()
            .filter(|idx| !idx.is_empty())
            .map(|idx| {
                let sub = CMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])]);
                let eig = HermitianEigen::new(&sub);
                (idx, eig)
            })
            .collect();
        Self { dim: m.nrows(), blocks }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[(Vec<usize>, HermitianEigen)] {
        &self.blocks
    }

    /// All eigenvalues, unordered.
    pub fn values(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|(_, e)| e.values.iter().copied()).collect()
    }

    pub fn min(&self) -> f64 {
        self.blocks.iter().map(|(_, e)| e.min()).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.blocks.iter().map(|(_, e)| e.max()).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `f(A)` assembled into the full space.
    pub fn apply<F: Fn(f64) -> C64>(&self, f: F) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (idx, eig) in &self.blocks {
            let sub = eig.apply(&f);
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    out[(i, j)] = sub[(a, b)];
                }
            }
        }
        out
    }

    /// `e^{−iθA}`.
    pub fn unitary(&self, theta: f64) -> CMatrix {
        self.apply(|a| C64::from_polar(1.0, -theta * a))
    }

    /// `e^{−iθA} X e^{iθA}`, exploiting the block structure of the unitary.
    pub fn conjugate(&self, theta: f64, x: &CMatrix) -> CMatrix {
        let us: Vec<CMatrix> = self.blocks.iter().map(|(_, e)| e.unitary(theta)).collect();
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for (bi, (ii, _)) in self.blocks.iter().enumerate() {
            for (bj, (jj, _)) in self.blocks.iter().enumerate() {
                let sub = CMatrix::from_fn(ii.len(), jj.len(), |a, b| x[(ii[a], jj[b])]);
                if sub.iter().all(|z| *z == ZERO) {
                    continue;
                }
                let r = &us[bi] * sub * us[bj].adjoint();
                for (a, &i) in ii.iter().enumerate() {
                    for (b, &j) in jj.iter().enumerate() {
                        out[(i, j)] = r[(a, b)];
                    }
                }
            }
        }
        out
    }

    /// Eigenpairs with eigenvectors lifted to the full space.
    pub fn eigenpairs(&self) -> impl Iterator<Item = (f64, DVector<C64>)> + '_ {
        self.blocks.iter().flat_map(move |(idx, eig)| {
            (0..eig.dim()).map(move |k| {
                let mut v = DVector::zeros(self.dim);
                for (a, &i) in idx.iter().enumerate() {
                    v[i] = eig.vectors[(a, k)];
                }
                (eig.values[k], v)
            })
        })
    }
}

/// `e^{−iθA}` for Hermitian `A`.
pub fn expm_hermitian(a: &CMatrix, theta: f64) -> CMatrix {
    HermitianEigen::new(a).unitary(theta)
}

/// Operator norm of a Hermitian matrix, `max |eigenvalue|`.
pub fn spectral_norm_hermitian(a: &CMatrix) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let e = HermitianEigen::new(a);
    e.min().abs().max(e.max().abs())
}

/// `‖U†U − 1‖_max`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    max_abs_diff(&(u.adjoint() * u), &identity(n))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Fermi–Dirac occupation `1/(1 + e^{x})`.
pub fn fermi(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// `x ln x` with the `0 ln 0 = 0` convention below `floor`.
pub fn xlogx(x: f64, floor: f64) -> f64 {
    if x <= floor {
        0.0
    } else {
        x * x.ln()
    }
}
