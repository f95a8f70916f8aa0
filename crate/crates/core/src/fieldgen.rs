//! Gaussian field generation: circulant embedding on rectangular
//! lattices (generic and Kronecker/fGn), dense Cholesky for scattered
//! points, and random-volatility scaling.

use crate::error::{Error, Result};
use crate::grid::{FieldSample, GridSpec, DEFAULT_NODE_CAP};
use crate::models::{rho_alpha, Covariance, CovarianceModel};
use crate::rng::{tags, StreamKey};
use crate::special::psi_inv;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Tuning knobs of the circulant-embedding backend.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingOptions {
    pub node_cap: usize,
    /// Cap on the number of complex entries of the embedding torus.
    pub embedding_cap: usize,
    pub max_doublings: usize,
    /// Eigenvalues below −clip_tol·max trigger doubling, then clipping.
    pub clip_tol: f64,
}

impl Default for EmbeddingOptions {
    fn default() -> Self {
        EmbeddingOptions {
            node_cap: DEFAULT_NODE_CAP,
            embedding_cap: 1 << 26,
            max_doublings: 4,
            clip_tol: 1e-8,
        }
    }
}

/// Precomputed circulant embedding of a stationary covariance on a grid.
///
/// Each call to `sample_pair` costs one d-dimensional FFT and yields two
/// independent fields (real and imaginary parts).
pub struct CirculantSampler {
    grid: GridSpec,
    counts: Vec<usize>,
    dims: Vec<usize>,
    scale: Vec<f64>,
    plans: Vec<Arc<dyn Fft<f64>>>,
    approximate: bool,
    min_eigen_ratio: f64,
    model: String,
}

fn embedding_dims(counts: &[usize], doublings: usize) -> Vec<usize> {
    counts
        .iter()
        .map(|&n| (2 * (n - 1)).max(2).next_power_of_two() << doublings)
        .collect()
}

fn signed_lag(k: usize, m: usize, h: f64) -> f64 {
    if k <= m / 2 {
        k as f64 * h
    } else {
        (k as f64 - m as f64) * h
    }
}

/// In-place forward FFT over every axis of a row-major array.
pub(crate) fn fft_nd(data: &mut [Complex64], dims: &[usize], plans: &[Arc<dyn Fft<f64>>]) {
    let d = dims.len();
    let total: usize = dims.iter().product();
    // contiguous last axis
    plans[d - 1].process(data);
    let mut line = vec![Complex64::new(0.0, 0.0); *dims.iter().max().unwrap()];
    for l in (0..d - 1).rev() {
        let n = dims[l];
        let stride: usize = dims[l + 1..].iter().product();
        let outer = total / (n * stride);
        let buf = &mut line[..n];
        for o in 0..outer {
            let base = o * n * stride;
            for s in 0..stride {
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = data[base + s + i * stride];
                }
                plans[l].process(buf);
                for (i, b) in buf.iter().enumerate() {
                    data[base + s + i * stride] = *b;
                }
            }
        }
    }
}

/// Real eigenvalues of the symmetric circulant with first row `c`.
fn circulant_eigen(c: Vec<f64>, dims: &[usize], planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let plans: Vec<_> = dims.iter().map(|&m| planner.plan_fft_forward(m)).collect();
    let mut buf: Vec<Complex64> = c.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut buf, dims, &plans);
    buf.into_iter().map(|z| z.re).collect()
}

/// Returns (min/max eigenvalue ratio, whether it breaches −tol).
fn screen(eig: &[f64], tol: f64) -> (f64, bool) {
    let max = eig.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.iter().cloned().fold(f64::MAX, f64::min);
    let ratio = if max > 0.0 { min / max } else { -1.0 };
    (ratio, ratio < -tol)
}

impl CirculantSampler {
    /// Embedding for a stationary covariance model.
    pub fn new<C: Covariance + ?Sized>(model: &C, grid: &GridSpec, opts: EmbeddingOptions, name: &str) -> Result<Self> {
        grid.validate(opts.node_cap)?;
        let d = grid.dim();
        if model.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: d,
            });
        }
        let counts = grid.node_counts();
        let mut planner = FftPlanner::new();
        let mut last = None;
        for doubling in 0..=opts.max_doublings {
            let dims = embedding_dims(&counts, doubling);
            let total = check_cap(&dims, opts.embedding_cap)?;
            let mut c = vec![0.0; total];
            let mut lag = vec![0.0; d];
            for (idx, slot) in c.iter_mut().enumerate() {
                let mut rem = idx;
                for l in (0..d).rev() {
                    let k = rem % dims[l];
                    rem /= dims[l];
                    lag[l] = signed_lag(k, dims[l], grid.h(l));
                }
                *slot = model.eval_lag(&lag);
            }
            let eig = circulant_eigen(c, &dims, &mut planner);
            let (ratio, bad) = screen(&eig, opts.clip_tol);
            if !bad {
                return Ok(Self::assemble(grid, counts, dims, eig, false, ratio, name, &mut planner));
            }
            last = Some((dims, eig, ratio));
            if check_cap(&embedding_dims(&counts, doubling + 1), opts.embedding_cap).is_err() {
                break;
            }
        }
        let (dims, eig, ratio) = last.expect("at least one embedding attempt");
        Ok(Self::assemble(grid, counts, dims, eig, true, ratio, name, &mut planner))
    }

    /// Kronecker embedding for the product covariance 2^{−d} ∏ ρ_{H_l}.
    pub fn fgn(hurst: &[f64], grid: &GridSpec, opts: EmbeddingOptions) -> Result<Self> {
        let model = CovarianceModel::FgnProduct { hurst: hurst.to_vec() };
        model.validate()?;
        grid.validate(opts.node_cap)?;
        let d = grid.dim();
        if hurst.len() != d {
            return Err(Error::DimensionMismatch {
                expected: hurst.len(),
                got: d,
            });
        }
        let counts = grid.node_counts();
        let mut planner = FftPlanner::new();
        let mut dims = Vec::with_capacity(d);
        let mut factors = Vec::with_capacity(d);
        let mut approximate = false;
        let mut worst = f64::INFINITY;
        for l in 0..d {
            let mut chosen = None;
            for doubling in 0..=opts.max_doublings {
                let m = embedding_dims(&counts[l..=l], doubling)[0];
                let c: Vec<f64> = (0..m)
                    .map(|k| 0.5 * rho_alpha(hurst[l], signed_lag(k, m, grid.h(l))))
                    .collect();
                let eig = circulant_eigen(c, &[m], &mut planner);
                let (ratio, bad) = screen(&eig, opts.clip_tol);
                chosen = Some((m, eig, ratio, bad));
                if !bad {
                    break;
                }
            }
            let (m, eig, ratio, bad) = chosen.unwrap();
            approximate |= bad;
            worst = worst.min(ratio);
            dims.push(m);
            factors.push(eig);
        }
        check_cap(&dims, opts.embedding_cap)?;
        let total: usize = dims.iter().product();
        let mut eig = vec![1.0; total];
        for (idx, e) in eig.iter_mut().enumerate() {
            let mut rem = idx;
            for l in (0..d).rev() {
                let k = rem % dims[l];
                rem /= dims[l];
                *e *= factors[l][k].max(0.0);
            }
        }
        Ok(Self::assemble(
            grid,
            counts,
            dims,
            eig,
            approximate,
            worst,
            &model.descriptor(),
            &mut planner,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        grid: &GridSpec,
        counts: Vec<usize>,
        dims: Vec<usize>,
        eig: Vec<f64>,
        approximate: bool,
        ratio: f64,
        name: &str,
        planner: &mut FftPlanner<f64>,
    ) -> Self {
        let total = eig.len() as f64;
        let scale = eig.into_iter().map(|e| (e.max(0.0) / total).sqrt()).collect();
        let plans = dims.iter().map(|&m| planner.plan_fft_forward(m)).collect();
        CirculantSampler {
            grid: grid.clone(),
            counts,
            dims,
            scale,
            plans,
            approximate,
            min_eigen_ratio: ratio,
            model: name.to_string(),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Torus sizes actually used.
    pub fn embedding_dims(&self) -> &[usize] {
        &self.dims
    }

    /// True when negative eigenvalues had to be clipped.
    pub fn is_approximate(&self) -> bool {
        self.approximate
    }

    /// min λ / max λ of the final embedding before clipping.
    pub fn min_eigen_ratio(&self) -> f64 {
        self.min_eigen_ratio
    }

    /// Two independent fields from one stream.
    pub fn sample_pair(&self, key: StreamKey) -> (Vec<f64>, Vec<f64>) {
        let mut rng = key.rng();
        let mut buf: Vec<Complex64> = self
            .scale
            .iter()
            .map(|&s| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                Complex64::new(s * a, s * b)
            })
            .collect();
        fft_nd(&mut buf, &self.dims, &self.plans);
        let n: usize = self.counts.iter().product();
        let d = self.dims.len();
        let mut re = Vec::with_capacity(n);
        let mut im = Vec::with_capacity(n);
        let mut idx = vec![0usize; d];
        for _ in 0..n {
            let mut flat = 0;
            for l in 0..d {
                flat = flat * self.dims[l] + idx[l];
            }
            re.push(buf[flat].re);
            im.push(buf[flat].im);
            for l in (0..d).rev() {
                idx[l] += 1;
                if idx[l] < self.counts[l] {
                    break;
                }
                idx[l] = 0;
            }
        }
        (re, im)
    }

    /// Replicate r is part r mod 2 of the pair drawn from stream (seed, r/2, tag).
    pub fn sample(&self, seed: u64, replicate: u64, tag: u64) -> FieldSample {
        let (re, im) = self.sample_pair(StreamKey::new(seed, replicate / 2, tag));
        FieldSample {
            grid: self.grid.clone(),
            values: if replicate.is_multiple_of(2) { re } else { im },
            seed,
            replicate,
            model: self.model.clone(),
            approximate: self.approximate,
            saturated: 0,
        }
    }
}

fn check_cap(dims: &[usize], cap: usize) -> Result<usize> {
    match dims.iter().try_fold(1usize, |a, &m| a.checked_mul(m)) {
        Some(t) if t <= cap => Ok(t),
        _ => Err(Error::Resource(format!("embedding torus {dims:?} exceeds the cap of {cap} entries"))),
    }
}

/// One stationary sample (replicate 0) by circulant embedding.
pub fn simulate_stationary(model: &CovarianceModel, grid: &GridSpec, seed: u64) -> Result<FieldSample> {
    model.validate()?;
    if !model.is_stationary() {
        return Err(Error::Precondition("model must be stationary".into()));
    }
    let s = CirculantSampler::new(model, grid, EmbeddingOptions::default(), &model.descriptor())?;
    Ok(s.sample(seed, 0, tags::FIELD))
}

/// One fractional-Gaussian-noise sample (replicate 0) via the Kronecker embedding.
pub fn simulate_fgn(hurst: &[f64], grid: &GridSpec, seed: u64) -> Result<FieldSample> {
    let s = CirculantSampler::fgn(hurst, grid, EmbeddingOptions::default())?;
    Ok(s.sample(seed, 0, tags::FIELD))
}

/// Values of a Gaussian vector at scattered points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSample {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub seed: u64,
    pub replicate: u64,
    /// Diagonal jitter (relative to the largest variance) that was needed.
    pub jitter: f64,
}

/// Dense Cholesky factor of a Gram matrix, tolerant to semidefinite input.
pub struct DenseSampler {
    points: Vec<Vec<f64>>,
    lower: Vec<f64>,
    n: usize,
    jitter: f64,
}

/// Maximum number of points of the dense backend.
pub const DENSE_MAX_POINTS: usize = 4096;

impl DenseSampler {
    /// Factorizes the Gram matrix ρ(t_i, t_j), escalating diagonal jitter
    /// from 0 through 1e−12 to 1e−8 (relative to the largest variance).
    /// Numerically zero pivots produce zero columns, so degenerate but
    /// semidefinite matrices factor exactly.
    pub fn new<R: Fn(&[f64], &[f64]) -> f64>(rho: R, points: &[Vec<f64>]) -> Result<Self> {
        let n = points.len();
        if n == 0 || n > DENSE_MAX_POINTS {
            return Err(Error::Precondition(format!(
                "dense backend needs 1..={DENSE_MAX_POINTS} points, got {n}"
            )));
        }
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = rho(&points[i], &points[j]);
                gram[i * n + j] = v;
                gram[j * n + i] = v;
            }
        }
        let scale = (0..n).map(|i| gram[i * n + i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for &jit in &[0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8] {
            if let Some(lower) = semidefinite_cholesky(&gram, n, jit * scale, scale) {
                return Ok(DenseSampler {
                    points: points.to_vec(),
                    lower,
                    n,
                    jitter: jit,
                });
            }
        }
        Err(Error::NotPositiveDefinite(format!(
            "Gram matrix of {n} points is indefinite beyond jitter 1e-8"
        )))
    }

    pub fn sample(&self, seed: u64, replicate: u64) -> PointSample {
        let mut rng = StreamKey::new(seed, replicate, tags::DENSE).rng();
        let z: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
        let values = (0..self.n)
            .map(|i| {
                let row = &self.lower[i * self.n..i * self.n + i + 1];
                row.iter().zip(&z).map(|(l, z)| l * z).sum()
            })
            .collect();
        PointSample {
            points: self.points.clone(),
            values,
            seed,
            replicate,
            jitter: self.jitter,
        }
    }
}

fn semidefinite_cholesky(a: &[f64], n: usize, jitter: f64, scale: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    let zero_tol = 64.0 * f64::EPSILON * scale * (n as f64).sqrt();
    for j in 0..n {
        let row_j = j * n;
        let s: f64 = l[row_j..row_j + j].iter().map(|v| v * v).sum();
        let d = a[row_j + j] + jitter - s;
        if d < -zero_tol {
            return None;
        }
        if d <= zero_tol {
            // zero pivot: the column is determined to be zero
            continue;
        }
        let ljj = d.sqrt();
        l[row_j + j] = ljj;
        for i in j + 1..n {
            let row_i = i * n;
            let dot: f64 = l[row_i..row_i + j].iter().zip(&l[row_j..row_j + j]).map(|(x, y)| x * y).sum();
            l[row_i + j] = (a[row_i + j] - dot) / ljj;
        }
    }
    Some(l)
}

/// One sample (replicate 0) of a centered Gaussian vector with covariance ρ at the points.
pub fn simulate_nonstationary<R: Fn(&[f64], &[f64]) -> f64>(rho: R, points: &[Vec<f64>], seed: u64) -> Result<PointSample> {
    Ok(DenseSampler::new(rho, points)?.sample(seed, 0))
}

/// Law of the random volatility multiplier ξ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VolatilityLaw {
    /// ξ ≡ c.
    Constant { c: f64 },
    /// ξ = u/|Ψ⁻¹(U)|, so ξ² ~ Lévy(0, u²).
    LevySqrt { u: f64 },
}

impl VolatilityLaw {
    pub fn draw(&self, key: StreamKey) -> f64 {
        match self {
            VolatilityLaw::Constant { c } => *c,
            VolatilityLaw::LevySqrt { u } => {
                let mut rng = key.with_tag(tags::VOLATILITY).rng();
                let bits: u64 = rng.random::<u64>() >> 11;
                let unif = (bits as f64 + 0.5) / (1u64 << 53) as f64;
                let z = psi_inv(unif).abs().max(f64::MIN_POSITIVE);
                u / z
            }
        }
    }
}

/// ξ·Y for one replicate: ξ from the volatility stream, Y from the base sampler.
pub fn simulate_random_volatility(
    base: &CirculantSampler,
    xi: VolatilityLaw,
    seed: u64,
    replicate: u64,
) -> (f64, FieldSample) {
    let factor = xi.draw(StreamKey::new(seed, replicate, 0));
    let mut s = base.sample(seed, replicate, tags::FIELD);
    for v in s.values.iter_mut() {
        *v *= factor;
    }
    (factor, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sample_is_deterministic() {
        let m = CovarianceModel::PowerLawIso { eta: 0.4, dim: 1 };
        let g = GridSpec::unit(&[64.0]);
        let a = simulate_stationary(&m, &g, 5).unwrap();
        let b = simulate_stationary(&m, &g, 5).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.values.len(), 64);
        let c = simulate_stationary(&m, &g, 6).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn fgn_half_embedding_is_identity() {
        let s = CirculantSampler::fgn(&[0.5], &GridSpec::unit(&[16.0]), EmbeddingOptions::default()).unwrap();
        assert!(!s.is_approximate());
        // all eigenvalues equal 1 when the covariance is δ
        let expect = (1.0 / s.embedding_dims()[0] as f64).sqrt();
        assert!(s.scale.iter().all(|v| (v - expect).abs() < 1e-12));
    }

    #[test]
    fn two_dimensional_shapes() {
        let g = GridSpec::with_mesh(&[8.0, 5.0], &[1.0, 0.5]);
        let m = CovarianceModel::Exponential { theta: 2.0, dim: 2 };
        let s = CirculantSampler::new(&m, &g, EmbeddingOptions::default(), "exp").unwrap();
        let (re, im) = s.sample_pair(StreamKey::new(1, 0, 0));
        assert_eq!(re.len(), 80);
        assert_eq!(im.len(), 80);
    }

    #[test]
    fn embedding_cap_is_enforced() {
        let opts = EmbeddingOptions {
            embedding_cap: 16,
            ..Default::default()
        };
        let m = CovarianceModel::Exponential { theta: 1.0, dim: 1 };
        let r = CirculantSampler::new(&m, &GridSpec::unit(&[64.0]), opts, "exp");
        assert!(matches!(r, Err(Error::Resource(_))));
    }

    #[test]
    fn dense_degenerate_field_is_constant() {
        let pts: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64]).collect();
        let s = simulate_nonstationary(|_, _| 1.0, &pts, 3).unwrap();
        assert_relative_eq!(s.values[0], s.values[1], epsilon = 1e-10);
        assert_relative_eq!(s.values[0], s.values[2], epsilon = 1e-10);
    }

    #[test]
    fn dense_rejects_indefinite() {
        let pts: Vec<Vec<f64>> = (0..2).map(|i| vec![i as f64]).collect();
        let r = DenseSampler::new(|t, s| if t == s { 1.0 } else { 2.0 }, &pts);
        assert!(matches!(r, Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn levy_multiplier_is_positive_and_finite() {
        let law = VolatilityLaw::LevySqrt { u: 1.0 };
        for r in 0..1000 {
            let x = law.draw(StreamKey::new(9, r, 0));
            assert!(x.is_finite() && x > 0.0);
        }
    }
}
