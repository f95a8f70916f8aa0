//! Discretized multiple Wiener–Itô integrals: draws from the Hermite-type
//! limit ∫′ ∏Q(y_j) K_V(y_1+…+y_m) M(dy_1)…M(dy_m) for m ∈ {2, 3}.
//!
//! Frequencies live on a uniform symmetric cell grid y_j = (j + ½)Δ − R
//! per axis, so the mirror of cell j is G − 1 − j and sums of m nodes fall
//! on a regular grid. The m-fold sum is an FFT convolution; the tuples
//! that share a cell or its mirror are removed by inclusion–exclusion.

use crate::error::{Error, Result};
use crate::fieldgen::fft_nd;
use crate::rng::{tags, StreamKey};
use crate::special::ball_kernel;
use crate::models::SpectralDensity;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Relative change of the normalization under grid refinement above
/// which the grid is declared too coarse.
pub const RESOLUTION_TOL: f64 = 0.05;
/// Most frequency cells in one oracle grid.
pub const MAX_CELLS: usize = 1 << 22;

/// Shape of the reference window V.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowShape {
    /// [0, 1]^d
    Box,
    /// the unit ball
    Ball,
}

/// K_V(x) = ∫_V e^{i⟨x,t⟩} dt.
pub fn kernel_v(shape: WindowShape, x: &[f64]) -> Complex64 {
    match shape {
        WindowShape::Box => x.iter().fold(Complex64::new(1.0, 0.0), |acc, &v| {
            let k = if v.abs() < 1e-8 {
                Complex64::new(1.0 - v * v / 6.0, v / 2.0)
            } else {
                (Complex64::new(0.0, v).exp() - 1.0) / Complex64::new(0.0, v)
            };
            acc * k
        }),
        WindowShape::Ball => {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            Complex64::new(ball_kernel(x.len(), r), 0.0)
        }
    }
}

/// Cell counts G_l (even) and truncation radii R_l of the frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleGrid {
    pub cells: Vec<usize>,
    pub truncation: Vec<f64>,
}

impl OracleGrid {
    /// The same truncation with twice the cells per axis.
    pub fn refined(&self) -> Self {
        OracleGrid {
            cells: self.cells.iter().map(|g| 2 * g).collect(),
            truncation: self.truncation.clone(),
        }
    }
}

struct Kernel {
    grid: Vec<Complex64>,
    hat: Vec<Complex64>,
}

/// Kernel values on the frequency grid and on the grid of m-fold sums.
pub struct SpectralKernelGrid {
    m: usize,
    shape: WindowShape,
    density: SpectralDensity,
    grid: OracleGrid,
    spacing: Vec<f64>,
    /// sqrt of the cell-averaged density, row-major over the cells.
    q: Vec<f64>,
    padded: Vec<usize>,
    kernel: Kernel,
    kernel_sq: Kernel,
    plans: Vec<Arc<dyn Fft<f64>>>,
    variance: f64,
}

impl SpectralKernelGrid {
    pub fn new(m: usize, density: &SpectralDensity, shape: WindowShape, grid: &OracleGrid) -> Result<Self> {
        if !(2..=3).contains(&m) {
            return Err(Error::InvalidParameter(format!("oracle order must be 2 or 3, got {m}")));
        }
        density.validate()?;
        density.check_rank(m)?;
        let d = density.dim();
        if grid.cells.len() != d || grid.truncation.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: grid.cells.len(),
            });
        }
        if grid.cells.iter().any(|g| *g < 2 || g % 2 != 0) || grid.truncation.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::InvalidParameter("cell counts must be even and truncation radii positive".into()));
        }
        let total: usize = grid.cells.iter().product();
        if total > MAX_CELLS {
            return Err(Error::Resource(format!("oracle grid of {total} cells exceeds 2^22")));
        }
        let spacing: Vec<f64> = grid.cells.iter().zip(&grid.truncation).map(|(g, r)| 2.0 * r / *g as f64).collect();
        let mut q = Vec::with_capacity(total);
        let mut lo = vec![0.0; d];
        let mut hi = vec![0.0; d];
        for flat in 0..total {
            let idx = unflatten(flat, &grid.cells);
            for l in 0..d {
                lo[l] = idx[l] as f64 * spacing[l] - grid.truncation[l];
                hi[l] = lo[l] + spacing[l];
            }
            q.push(density.cell_average(&lo, &hi).sqrt());
        }
        let padded: Vec<usize> = grid.cells.iter().map(|g| (m * g).next_power_of_two()).collect();
        let mut planner = FftPlanner::new();
        let plans: Vec<_> = padded.iter().map(|&p| planner.plan_fft_forward(p)).collect();
        let ptotal: usize = padded.iter().product();
        let mut kgrid = Vec::with_capacity(ptotal);
        let mut x = vec![0.0; d];
        for flat in 0..ptotal {
            let s = unflatten(flat, &padded);
            let mut inside = true;
            for l in 0..d {
                if s[l] > m * (grid.cells[l] - 1) {
                    inside = false;
                }
                x[l] = (s[l] as f64 + 0.5 * m as f64) * spacing[l] - m as f64 * grid.truncation[l];
            }
            kgrid.push(if inside { kernel_v(shape, &x) } else { Complex64::new(0.0, 0.0) });
        }
        let ksq: Vec<Complex64> = kgrid.iter().map(|k| Complex64::new(k.norm_sqr(), 0.0)).collect();
        let kernel = make_kernel(kgrid, &padded, &plans);
        let kernel_sq = make_kernel(ksq, &padded, &plans);
        let mut out = SpectralKernelGrid {
            m,
            shape,
            density: density.clone(),
            grid: grid.clone(),
            spacing,
            q,
            padded,
            kernel,
            kernel_sq,
            plans,
            variance: 0.0,
        };
        let vol: f64 = out.spacing.iter().product();
        let weights: Vec<Complex64> = out.q.iter().map(|q| Complex64::new(q * q * vol, 0.0)).collect();
        let fact: f64 = (1..=m).map(|k| k as f64).product();
        let v = fact * out.offdiag(&weights, &out.kernel_sq).re;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Degenerate(format!("discrete kernel norm {v} is not positive")));
        }
        out.variance = v;
        Ok(out)
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn grid(&self) -> &OracleGrid {
        &self.grid
    }

    /// Variance of the unnormalized discrete integral, m!·Σ′∏q_j²Δ|K|².
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Hermitian Gaussian measure of the cells: E|W_j|² = q̄_j·∏Δ_l.
    pub fn sample_measure(&self, seed: u64, index: u64) -> Vec<Complex64> {
        let mut rng = StreamKey::new(seed, index, tags::ORACLE).rng();
        let total = self.q.len();
        let vol: f64 = self.spacing.iter().product();
        let s = (0.5 * vol).sqrt();
        let mut a = vec![Complex64::new(0.0, 0.0); total];
        for j in 0..total / 2 {
            let g1: f64 = rng.sample(StandardNormal);
            let g2: f64 = rng.sample(StandardNormal);
            let w = Complex64::new(s * g1, s * g2);
            a[j] = w * self.q[j];
            a[total - 1 - j] = w.conj() * self.q[total - 1 - j];
        }
        a
    }

    /// Unit-variance integral of a measure on this grid.
    pub fn evaluate(&self, measure: &[Complex64]) -> Result<f64> {
        if measure.len() != self.q.len() {
            return Err(Error::DimensionMismatch {
                expected: self.q.len(),
                got: measure.len(),
            });
        }
        Ok(self.offdiag(measure, &self.kernel).re / self.variance.sqrt())
    }

    /// Unnormalized realization; the imaginary part is rounding noise.
    pub fn draw_raw(&self, seed: u64, index: u64) -> Complex64 {
        self.offdiag(&self.sample_measure(seed, index), &self.kernel)
    }

    /// One unit-variance draw.
    pub fn draw(&self, seed: u64, index: u64) -> f64 {
        self.draw_raw(seed, index).re / self.variance.sqrt()
    }

    /// Draws `count` values for indices 0..count.
    pub fn draws(&self, seed: u64, count: usize) -> Vec<f64> {
        (0..count as u64).into_par_iter().map(|i| self.draw(seed, i)).collect()
    }

    /// Relative change of the normalization when Δ is halved; an error
    /// above `RESOLUTION_TOL`.
    pub fn resolution_check(&self) -> Result<f64> {
        let fine = SpectralKernelGrid::new(self.m, &self.density, self.shape, &self.grid.refined())?;
        let disc = (self.variance / fine.variance - 1.0).abs();
        if disc > RESOLUTION_TOL {
            return Err(Error::Resolution { discrepancy: disc });
        }
        Ok(disc)
    }

    fn pad(&self, a: &[Complex64], stretch: usize) -> Vec<Complex64> {
        let ptotal: usize = self.padded.iter().product();
        let mut buf = vec![Complex64::new(0.0, 0.0); ptotal];
        for (flat, v) in a.iter().enumerate() {
            let idx = unflatten(flat, &self.grid.cells);
            buf[flatten_map(&idx, &self.padded, |_, j| stretch * j)] = *v;
        }
        fft_nd(&mut buf, &self.padded, &self.plans);
        buf
    }

    /// Σ over off-diagonal m-tuples of ∏a_j·k(Σ y_j).
    fn offdiag(&self, a: &[Complex64], k: &Kernel) -> Complex64 {
        let total = a.len();
        let ptotal = k.grid.len() as f64;
        let cells = &self.grid.cells;
        let mirror = |j: usize| total - 1 - j;
        let at = |idx: &[usize], f: &dyn Fn(usize, usize) -> usize| k.grid[flatten_map(idx, &self.padded, f)];
        let ahat = self.pad(a, 1);
        let pair_mirror: Complex64 = (0..total).map(|j| a[j] * a[mirror(j)]).sum();
        match self.m {
            2 => {
                let full: Complex64 = ahat.iter().zip(&k.hat).map(|(x, b)| x * x * b).sum::<Complex64>() / ptotal;
                let mut same = Complex64::new(0.0, 0.0);
                for (j, aj) in a.iter().enumerate() {
                    let idx = unflatten(j, cells);
                    same += aj * aj * at(&idx, &|_, v| 2 * v);
                }
                let zero = at(&vec![0; cells.len()], &|l, _| cells[l] - 1);
                full - same - zero * pair_mirror
            }
            _ => {
                let full: Complex64 = ahat.iter().zip(&k.hat).map(|(x, b)| x * x * x * b).sum::<Complex64>() / ptotal;
                let sq: Vec<Complex64> = a.iter().map(|v| v * v).collect();
                let dhat = self.pad(&sq, 2);
                let p1: Complex64 = dhat.iter().zip(&ahat).zip(&k.hat).map(|((x, y), b)| x * y * b).sum::<Complex64>() / ptotal;
                let mut lin = Complex64::new(0.0, 0.0);
                let mut triple = Complex64::new(0.0, 0.0);
                for (j, aj) in a.iter().enumerate() {
                    let idx = unflatten(j, cells);
                    let k1 = at(&idx, &|l, v| v + cells[l] - 1);
                    lin += aj * k1;
                    triple += aj * aj * aj * at(&idx, &|_, v| 3 * v) + 3.0 * aj * aj * a[mirror(j)] * k1;
                }
                full - 3.0 * (p1 + pair_mirror * lin) + 2.0 * triple
            }
        }
    }
}

fn make_kernel(grid: Vec<Complex64>, padded: &[usize], plans: &[Arc<dyn Fft<f64>>]) -> Kernel {
    let mut hat: Vec<Complex64> = grid.iter().map(|k| k.conj()).collect();
    fft_nd(&mut hat, padded, plans);
    for h in hat.iter_mut() {
        *h = h.conj();
    }
    Kernel { grid, hat }
}

fn unflatten(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    for l in (0..dims.len()).rev() {
        idx[l] = flat % dims[l];
        flat /= dims[l];
    }
    idx
}

fn flatten_map(idx: &[usize], dims: &[usize], f: impl Fn(usize, usize) -> usize) -> usize {
    idx.iter().enumerate().fold(0, |acc, (l, &j)| acc * dims[l] + f(l, j))
}

/// Measure on the grid with half the cells per axis: each coarse cell
/// collects the 2^d fine cells it contains. Exact in law, since the
/// weights are cell averages of the density.
pub fn coarsen_measure(fine_cells: &[usize], measure: &[Complex64]) -> Result<Vec<Complex64>> {
    if fine_cells.iter().any(|g| g % 4 != 0) {
        return Err(Error::InvalidParameter("fine cell counts must be multiples of 4".into()));
    }
    let total: usize = fine_cells.iter().product();
    if measure.len() != total {
        return Err(Error::DimensionMismatch {
            expected: total,
            got: measure.len(),
        });
    }
    let coarse: Vec<usize> = fine_cells.iter().map(|g| g / 2).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); total >> fine_cells.len()];
    for (flat, w) in measure.iter().enumerate() {
        let idx = unflatten(flat, fine_cells);
        out[flatten_map(&idx, &coarse, |_, j| j / 2)] += *w;
    }
    Ok(out)
}

/// One unit-variance realization of the discretized m-fold integral,
/// after checking that the grid resolves the normalization.
pub fn sample_hermite_oracle(
    m: usize,
    density: &SpectralDensity,
    shape: WindowShape,
    grid: &OracleGrid,
    seed: u64,
    index: u64,
) -> Result<f64> {
    let g = SpectralKernelGrid::new(m, density, shape, grid)?;
    g.resolution_check()?;
    Ok(g.draw(seed, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small(m: usize, g: usize) -> SpectralKernelGrid {
        let density = SpectralDensity::AnisotropicProduct { gammas: vec![0.3] };
        let grid = OracleGrid {
            cells: vec![g],
            truncation: vec![40.0],
        };
        SpectralKernelGrid::new(m, &density, WindowShape::Box, &grid).unwrap()
    }

    /// Direct O(G^m) evaluation of the off-diagonal sum.
    fn brute(k: &SpectralKernelGrid, a: &[Complex64]) -> Complex64 {
        let g = a.len();
        let y = |j: usize| (j as f64 + 0.5) * k.spacing[0] - k.grid.truncation[0];
        let linked = |i: usize, j: usize| i == j || i + j == g - 1;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..g {
            for j in 0..g {
                if linked(i, j) {
                    continue;
                }
                if k.m == 2 {
                    acc += a[i] * a[j] * kernel_v(k.shape, &[y(i) + y(j)]);
                    continue;
                }
                for l in 0..g {
                    if linked(i, l) || linked(j, l) {
                        continue;
                    }
                    acc += a[i] * a[j] * a[l] * kernel_v(k.shape, &[y(i) + y(j) + y(l)]);
                }
            }
        }
        acc
    }

    #[test]
    fn kernels() {
        let x = [0.7, -1.3];
        let b = kernel_v(WindowShape::Box, &x);
        let want = x.iter().fold(Complex64::new(1.0, 0.0), |acc, &v| {
            acc * (Complex64::new(0.0, v).exp() - 1.0) / Complex64::new(0.0, v)
        });
        assert_relative_eq!(b.re, want.re, epsilon = 1e-14);
        assert_relative_eq!(b.im, want.im, epsilon = 1e-14);
        assert_relative_eq!(kernel_v(WindowShape::Box, &[0.0, 0.0]).re, 1.0);
        assert_relative_eq!(kernel_v(WindowShape::Ball, &[0.0, 0.0]).re, std::f64::consts::PI, epsilon = 1e-12);
        let r = 2.0f64;
        assert_relative_eq!(kernel_v(WindowShape::Ball, &[r]).re, 2.0 * r.sin() / r, epsilon = 1e-12);
    }

    #[test]
    fn fft_sum_matches_brute_force() {
        for m in [2, 3] {
            let k = small(m, 16);
            let a: Vec<Complex64> = (0..16)
                .map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64 * 0.11).cos()))
                .collect();
            let fast = k.offdiag(&a, &k.kernel);
            let slow = brute(&k, &a);
            assert_relative_eq!(fast.re, slow.re, max_relative = 1e-10, epsilon = 1e-12);
            assert_relative_eq!(fast.im, slow.im, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn draws_are_real() {
        let k = small(2, 256);
        for i in 0..20 {
            let z = k.draw_raw(3, i);
            assert!(z.im.abs() <= 1e-10 * z.re.abs().max(1.0), "{z}");
        }
        let k = small(3, 64);
        let z = k.draw_raw(3, 0);
        assert!(z.im.abs() <= 1e-10 * z.re.abs().max(1.0));
    }

    #[test]
    fn unit_variance() {
        let k = small(2, 1024);
        let xs = k.draws(11, 10_000);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
        assert!(mean.abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn rejects_bad_input() {
        let density = SpectralDensity::AnisotropicProduct { gammas: vec![0.6] };
        let grid = OracleGrid {
            cells: vec![64],
            truncation: vec![10.0],
        };
        assert!(matches!(
            SpectralKernelGrid::new(2, &density, WindowShape::Box, &grid),
            Err(Error::Precondition(_))
        ));
        let density = SpectralDensity::AnisotropicProduct { gammas: vec![0.3] };
        assert!(SpectralKernelGrid::new(4, &density, WindowShape::Box, &grid).is_err());
        let coarse = OracleGrid {
            cells: vec![4],
            truncation: vec![200.0],
        };
        let g = SpectralKernelGrid::new(2, &density, WindowShape::Box, &coarse).unwrap();
        assert!(matches!(g.resolution_check(), Err(Error::Resolution { .. })));
    }
}
