//! The weighted Sobolev-type norm used in the smallness condition,
//!
//! ```text
//! ‖f‖′_M = 2^{−3M/2} ⟨f, Π_k (−∂²_k + x_k² + 1)³ f⟩^{1/2},
//! ```
//!
//! discretized on a uniform grid over `[−8, 8]^M` with central differences
//! (zero boundary values) and rectangle quadrature. Every value comes with a
//! Richardson estimate from one grid doubling.
//!
//! Lattice kernels are carried into the continuum by placing a normalized
//! harmonic-oscillator ground state `φ₀(x − x_i)` at each site of the local
//! region (`x_i` = site index minus the region's mean). A degree-`N` kernel
//! then lives on `M = 2N` flattened coordinates and its form factorizes into
//! one-dimensional Gram matrices, so no `M`-dimensional grid is needed.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::drive::KernelSpec;
use crate::error::{Error, Result};
use crate::fock::LatticeSpec;
use crate::linalg::{C64, ZERO};

/// `1/(24π)`.
pub const SMALLNESS_THRESHOLD: f64 = 1.0 / (24.0 * std::f64::consts::PI);

/// Default box half-width.
pub const BOX_HALF_WIDTH: f64 = 8.0;
/// Default coarse resolution; the fine grid doubles it.
pub const COARSE_POINTS: usize = 1 << 9;

/// A norm value with its discretization-error estimate.
#[derive(Clone, Debug, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub richardson_estimate: f64,
    pub coarse_value: f64,
}

/// Uniform grid on `[−a, a]` with `points` nodes including both ends.
#[derive(Clone, Copy, Debug)]
pub struct Grid {
    pub points: usize,
    pub half_width: f64,
}

impl Grid {
    pub fn new(points: usize) -> Self {
        Self {
            points,
            half_width: BOX_HALF_WIDTH,
        }
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.step()
    }

    fn doubled(&self) -> Self {
        Self {
            points: 2 * self.points,
            half_width: self.half_width,
        }
    }
}

/// `(−∂² + x² + 1)` along one axis of an `M`-dimensional row-major array.
fn apply_axis(data: &[C64], grid: &Grid, m: usize, axis: usize) -> Vec<C64> {
    let n = grid.points;
    let h2 = grid.step() * grid.step();
    let stride = n.pow((m - 1 - axis) as u32);
    let mut out = vec![ZERO; data.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let i = (idx / stride) % n;
        let x = grid.node(i);
        let centre = data[idx];
        let left = if i > 0 { data[idx - stride] } else { ZERO };
        let right = if i + 1 < n { data[idx + stride] } else { ZERO };
        *o = -(left - centre * 2.0 + right) / h2 + centre * (x * x + 1.0);
    }
    out
}

/// `⟨f, Π_k (−∂²_k + x_k² + 1)³ f⟩` for samples of `f` on `grid^M`.
pub fn quadratic_form(samples: &[C64], m: usize, grid: &Grid) -> Result<f64> {
    let expected = grid
        .points
        .checked_pow(m as u32)
        .ok_or_else(|| Error::Unsupported("grid too large".into()))?;
    if samples.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: samples.len(),
        });
    }
    let mut g = samples.to_vec();
    for axis in 0..m {
        for _ in 0..3 {
            g = apply_axis(&g, grid, m, axis);
        }
    }
    let vol = grid.step().powi(m as i32);
    let form: C64 = samples.iter().zip(&g).map(|(f, of)| f.conj() * of).sum();
    Ok(form.re * vol)
}

/// `2^{−3M/2} √form`.
pub fn norm_from_form(form: f64, m: usize) -> f64 {
    2f64.powf(-1.5 * m as f64) * form.max(0.0).sqrt()
}

fn richardson(coarse: f64, fine: f64) -> Result<NormEstimate> {
    let estimate = (fine - coarse).abs() / 3.0;
    if fine > 0.0 && estimate > 0.1 * fine {
        return Err(Error::GridTooCoarse { estimate, value: fine });
    }
    Ok(NormEstimate {
        value: fine,
        richardson_estimate: estimate,
        coarse_value: coarse,
    })
}

/// `‖f‖′_M` of a function given pointwise, on `2^9` and `2^{10}` points per
/// axis. Direct grids are limited to `M ≤ 2`.
pub fn function_norm<F>(f: F, m: usize) -> Result<NormEstimate>
where
    F: Fn(&[f64]) -> C64,
{
    function_norm_on(f, m, Grid::new(COARSE_POINTS))
}

pub fn function_norm_on<F>(f: F, m: usize, coarse: Grid) -> Result<NormEstimate>
where
    F: Fn(&[f64]) -> C64,
{
    if m == 0 || m > 2 {
        return Err(Error::Unsupported(format!("direct grids support 1 or 2 coordinates, got {m}")));
    }
    let eval = |grid: &Grid| -> Result<f64> {
        let n = grid.points;
        let mut x = vec![0.0; m];
        let samples: Vec<C64> = (0..n.pow(m as u32))
            .map(|idx| {
                let mut r = idx;
                for k in (0..m).rev() {
                    x[k] = grid.node(r % n);
                    r /= n;
                }
                f(&x)
            })
            .collect();
        Ok(norm_from_form(quadratic_form(&samples, m, grid)?, m))
    };
    let c = eval(&coarse)?;
    let fine = eval(&coarse.doubled())?;
    richardson(c, fine)
}

/// Normalized harmonic ground state `π^{−1/4} e^{−x²/2}`.
pub fn ground_state(x: f64) -> f64 {
    std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp()
}

/// Gram matrix `⟨φ₀(·−x_a), (−∂² + x² + 1)³ φ₀(·−x_b)⟩` on a 1-D grid.
fn bump_gram(centres: &[f64], grid: &Grid) -> DMatrix<f64> {
    let n = grid.points;
    let bumps: Vec<Vec<C64>> = centres
        .iter()
        .map(|&c| (0..n).map(|i| C64::new(ground_state(grid.node(i) - c), 0.0)).collect())
        .collect();
    let applied: Vec<Vec<C64>> = bumps
        .iter()
        .map(|b| {
            let mut g = b.clone();
            for _ in 0..3 {
                g = apply_axis(&g, grid, 1, 0);
            }
            g
        })
        .collect();
    let h = grid.step();
    DMatrix::from_fn(centres.len(), centres.len(), |a, b| {
        bumps[a].iter().zip(&applied[b]).map(|(x, y)| (x.conj() * y).re).sum::<f64>() * h
    })
}

/// Site coordinates relative to the local region's mean.
pub fn site_positions(lattice: &LatticeSpec) -> Vec<f64> {
    let region = lattice.local_region();
    let mean = region.iter().sum::<usize>() as f64 / region.len() as f64;
    region.iter().map(|&s| s as f64 - mean).collect()
}

/// Discretized form of one embedded kernel, given the Gram matrix over the
/// local region.
fn kernel_form(kernel: &KernelSpec, lattice: &LatticeSpec, gram: &DMatrix<f64>) -> Result<f64> {
    let pos = |s: usize| {
        lattice
            .local_region()
            .binary_search(&s)
            .map_err(|_| Error::NotLocal(format!("kernel touches site {s} outside the local region")))
    };
    let labels: Vec<(Vec<usize>, C64)> = kernel
        .entries
        .iter()
        .map(|e| {
            let idx = e
                .creators
                .iter()
                .chain(&e.annihilators)
                .map(|&s| pos(s))
                .collect::<Result<Vec<_>>>()?;
            Ok((idx, e.coefficient()))
        })
        .collect::<Result<_>>()?;
    let mut form = ZERO;
    for (a, wa) in &labels {
        for (b, wb) in &labels {
            let overlap: f64 = a.iter().zip(b).map(|(&i, &j)| gram[(i, j)]).product();
            form += wa.conj() * wb * overlap;
        }
    }
    Ok(form.re)
}

/// `‖w^N‖′_{2N}` of one lattice kernel at a given grid.
fn kernel_norm_on(kernel: &KernelSpec, lattice: &LatticeSpec, grid: &Grid) -> Result<f64> {
    if kernel.degree == 0 || kernel.degree > 2 {
        return Err(Error::Unsupported(format!(
            "smallness norm is implemented for degrees 1 and 2, got {}",
            kernel.degree
        )));
    }
    let gram = bump_gram(&site_positions(lattice), grid);
    Ok(norm_from_form(kernel_form(kernel, lattice, &gram)?, 2 * kernel.degree))
}

/// `‖w^N‖′_{2N}` with its Richardson estimate.
pub fn kernel_norm(kernel: &KernelSpec, lattice: &LatticeSpec) -> Result<NormEstimate> {
    let coarse = Grid::new(COARSE_POINTS);
    let c = kernel_norm_on(kernel, lattice, &coarse)?;
    let f = kernel_norm_on(kernel, lattice, &coarse.doubled())?;
    richardson(c, f)
}

/// `‖W‖′ = Σ_N 2^{5N} N ‖w^N‖′_{2N}` for a static kernel list; kernels of
/// equal degree are summed first.
pub fn drive_norm(kernels: &[KernelSpec], lattice: &LatticeSpec) -> Result<NormEstimate> {
    let mut by_degree: Vec<KernelSpec> = Vec::new();
    for k in kernels {
        if k.degree == 0 || k.degree > 2 {
            return Err(Error::Unsupported(format!(
                "smallness norm is implemented for degrees 1 and 2, got {}",
                k.degree
            )));
        }
        match by_degree.iter_mut().find(|d| d.degree == k.degree) {
            Some(d) => d.entries.extend(k.entries.iter().cloned()),
            None => by_degree.push(k.clone()),
        }
    }
    let mut out = NormEstimate {
        value: 0.0,
        richardson_estimate: 0.0,
        coarse_value: 0.0,
    };
    for k in &by_degree {
        let weight = 2f64.powi(5 * k.degree as i32) * k.degree as f64;
        let est = kernel_norm(k, lattice)?;
        out.value += weight * est.value;
        out.richardson_estimate += weight * est.richardson_estimate;
        out.coarse_value += weight * est.coarse_value;
    }
    Ok(out)
}
