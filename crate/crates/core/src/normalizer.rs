//! Centering and scaling sequences: σ²_{n,m} by quadrature, the fGn
//! closed forms, the power-law asymptotic, and the (λ, q, κ) normalizer.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::models::{Covariance, CovarianceModel};
use crate::quadrature::{graded_points, integrate_box, Estimate, Tolerance};
use crate::special::beta;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Graded panels per axis; fewer in higher dimension, where the nested
/// adaptive rule refines on its own.
fn graded_panels(d: usize) -> usize {
    match d {
        1 => 24,
        2 => 12,
        _ => 6,
    }
}

const MAX_REL_ERROR: f64 = 1e-6;

/// How σ²_{n,m} is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMethod {
    Quadrature,
    ClosedFormFgn,
    #[serde(rename = "asymptotic_example27")]
    PowerLawAsymptotic,
    #[serde(rename = "lemma28")]
    WeightedKappa { lambda: f64, kappa: f64 },
    WeightedNonstationary,
    /// Exact double sum over the sampled lattice.
    LatticeSum,
}

/// A computed normalization for one window and Hermite order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationPlan {
    pub m: usize,
    pub window: GridSpec,
    pub method: NormalizationMethod,
    /// σ²_{n,m}.
    pub value: f64,
    /// Absolute error estimate of `value` (0 for closed forms).
    pub error: f64,
    pub centering: f64,
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

/// m!·∫ C^m(t)·∏ max(r_l − |t_l|, 0) dt over R^d.
///
/// Uses the coordinate-wise evenness of the registered models to fold
/// the integral onto [0, r]^d, with panels graded toward 0 (exponent 2)
/// and split at the model's kinks.
pub fn sigma_stationary<C: Covariance + ?Sized>(model: &C, extents: &[f64], m: usize) -> Result<Estimate> {
    let d = model.dim();
    if extents.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: extents.len(),
        });
    }
    if m == 0 {
        return Err(Error::InvalidParameter("Hermite order m must be ≥ 1".into()));
    }
    if extents.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidParameter("window extents must be positive".into()));
    }
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|l| graded_points(extents[l], graded_panels(d), &model.kinks(l)))
        .collect();
    let mi = m as i32;
    let integrand = |t: &[f64]| {
        let w: f64 = t.iter().zip(extents).map(|(t, r)| r - t).product();
        model.eval_lag(t).powi(mi) * w
    };
    let tol = Tolerance {
        abs: 1e-300,
        rel: 1e-9,
        max_intervals: 4000,
    };
    let est = integrate_box(&integrand, &axes, tol);
    let scale = factorial(m) * 2f64.powi(d as i32);
    let out = Estimate {
        value: scale * est.value,
        error: scale * est.error,
    };
    if !(out.error <= MAX_REL_ERROR * out.value.abs()) {
        return Err(Error::Accuracy {
            estimate: out.error / out.value.abs(),
            tolerance: MAX_REL_ERROR,
            context: format!("sigma_stationary m={m} extents={extents:?}"),
        });
    }
    Ok(out)
}

/// ∫_{−r}^{r} ρ_α(v) dv = 2/(2α+1)·((r+1)^{2α+1} + (r−1)^{2α+1} − 2r^{2α+1}), r > 1.
pub fn fgn_primitive(alpha: f64, r: f64) -> Result<f64> {
    check_fgn_args(alpha, r)?;
    let e = 2.0 * alpha + 1.0;
    Ok(2.0 / e * ((r + 1.0).powf(e) + (r - 1.0).powf(e) - 2.0 * r.powf(e)))
}

/// ∫_{−r}^{r} ρ_α(v)(r − |v|) dv
/// = ((r+1)^{2α+2} + (r−1)^{2α+2} − 2r^{2α+2} − 2)/((2α+1)(α+1)), r > 1.
pub fn fgn_variance_closed(alpha: f64, r: f64) -> Result<f64> {
    check_fgn_args(alpha, r)?;
    let e = 2.0 * alpha + 2.0;
    let num = (r + 1.0).powf(e) + (r - 1.0).powf(e) - 2.0 * r.powf(e) - 2.0;
    Ok(num / ((2.0 * alpha + 1.0) * (alpha + 1.0)))
}

fn check_fgn_args(alpha: f64, r: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(r > 1.0) {
        return Err(Error::Range {
            what: "fGn window half-width",
            detail: format!("r = {r} must exceed 1"),
        });
    }
    Ok(())
}

/// σ²_{n,1} for the window [0, r] under C(t) ~ |t|^{−η}: the leading term
/// 2B(2, 1−η) r^{2−η}, i.e. 2^{3−η}B(2,1−η)n^{2−η} with r = 2n.
pub fn power_law_asymptotic(eta: f64, r: f64) -> f64 {
    2.0 * beta(2.0, 1.0 - eta) * r.powf(2.0 - eta)
}

/// m!·(∏h_l)²·Σ_{t,s} C^m(t − s) over the nodes of `grid`, by lags:
/// Σ_k ∏(N_l − |k_l|)·C^m(kh).
pub fn lattice_sigma<C: Covariance + ?Sized>(model: &C, grid: &GridSpec, m: usize) -> Result<f64> {
    let d = model.dim();
    if grid.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: grid.dim(),
        });
    }
    if m == 0 {
        return Err(Error::InvalidParameter("Hermite order m must be ≥ 1".into()));
    }
    let counts = grid.node_counts();
    if counts.contains(&0) {
        return Err(Error::InvalidParameter("grid has no nodes".into()));
    }
    let spans: Vec<usize> = counts.iter().map(|n| 2 * n - 1).collect();
    let total = spans
        .iter()
        .try_fold(1usize, |a, &s| a.checked_mul(s))
        .filter(|t| *t <= 1 << 28)
        .ok_or_else(|| Error::Resource(format!("lag set of {spans:?} is too large")))?;
    let mi = m as i32;
    let rows: Vec<f64> = (0..total)
        .into_par_iter()
        .with_min_len(4096)
        .map(|flat| {
            let mut rem = flat;
            let mut lag = vec![0.0; d];
            let mut weight = 1.0;
            for l in (0..d).rev() {
                let k = (rem % spans[l]) as i64 - (counts[l] as i64 - 1);
                rem /= spans[l];
                lag[l] = k as f64 * grid.h(l);
                weight *= (counts[l] as i64 - k.abs()) as f64;
            }
            weight * model.eval_lag(&lag).powi(mi)
        })
        .collect();
    let cell = grid.cell_volume();
    Ok(factorial(m) * cell * cell * pairwise_sum(&rows))
}

/// cell_volume²·Σ_{t,s} a_1(t)a_1(s)ρ(t,s) over a point set (≤ 4096 points).
pub fn sigma_nonstationary<R, A>(rho: R, a1: A, points: &[Vec<f64>], cell_volume: f64) -> Result<f64>
where
    R: Fn(&[f64], &[f64]) -> f64,
    A: Fn(&[f64]) -> f64,
{
    if points.len() > crate::fieldgen::DENSE_MAX_POINTS {
        return Err(Error::Precondition(format!(
            "at most {} points, got {}",
            crate::fieldgen::DENSE_MAX_POINTS,
            points.len()
        )));
    }
    let w: Vec<f64> = points.iter().map(|p| a1(p)).collect();
    let mut rows = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let mut acc = 0.0;
        for (j, q) in points.iter().enumerate() {
            acc += w[j] * rho(p, q);
        }
        rows.push(w[i] * acc);
    }
    Ok(cell_volume * cell_volume * pairwise_sum(&rows))
}

/// Summation by a fixed binary tree; the order depends only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// κ = ∫_{[−1,1]^d} q(v)∏(1 − |v_l|) dv and the asymptotic σ²_{n,1} = ν²κλ.
pub fn kappa_normalizer<Q: Fn(&[f64]) -> f64>(q: Q, dim: usize, lambda_value: f64, window_volume: f64) -> Result<(f64, f64)> {
    let kappa = kappa_constant(q, dim)?;
    Ok((window_volume * window_volume * kappa * lambda_value, kappa))
}

pub fn kappa_constant<Q: Fn(&[f64]) -> f64>(q: Q, dim: usize) -> Result<f64> {
    let half = graded_points(1.0, graded_panels(dim), &[]);
    let mut axis: Vec<f64> = half.iter().rev().map(|x| -x).collect();
    axis.extend_from_slice(&half[1..]);
    let axes = vec![axis; dim];
    let integrand = |v: &[f64]| q(v) * v.iter().map(|x| 1.0 - x.abs()).product::<f64>();
    let tol = Tolerance {
        abs: 1e-300,
        rel: 1e-10,
        max_intervals: 4000,
    };
    let est = integrate_box(&integrand, &axes, tol);
    if !est.value.is_finite() || est.error > 1e-6 * est.value.abs() {
        return Err(Error::Accuracy {
            estimate: est.error,
            tolerance: 1e-6,
            context: "kappa quadrature did not converge".into(),
        });
    }
    if !(est.value > 0.0) {
        return Err(Error::Degenerate(format!("kappa = {} is not positive", est.value)));
    }
    Ok(est.value)
}

/// σ²_{n,m} for `window` under the requested method.
pub fn plan_sigma(model: &CovarianceModel, window: &GridSpec, m: usize, method: NormalizationMethod) -> Result<NormalizationPlan> {
    let extents = &window.extents;
    let (value, error) = match method {
        NormalizationMethod::Quadrature => {
            let e = sigma_stationary(model, extents, m)?;
            (e.value, e.error)
        }
        NormalizationMethod::ClosedFormFgn => match model {
            CovarianceModel::FgnProduct { hurst } if m == 1 => {
                let mut v = 1.0;
                for (h, r) in hurst.iter().zip(extents) {
                    v *= 0.5 * fgn_variance_closed(*h, *r)?;
                }
                (v, 0.0)
            }
            _ => {
                return Err(Error::Precondition(
                    "closed_form_fgn applies to fgn_product with m = 1".into(),
                ))
            }
        },
        NormalizationMethod::PowerLawAsymptotic => match model {
            CovarianceModel::PowerLawIso { eta, dim: 1 } if m == 1 && *eta < 1.0 => {
                (power_law_asymptotic(*eta, extents[0]), 0.0)
            }
            _ => {
                return Err(Error::Precondition(
                    "asymptotic_example27 applies to 1-d power_law_iso with eta < 1 and m = 1".into(),
                ))
            }
        },
        NormalizationMethod::WeightedKappa { lambda, kappa } => {
            let vol: f64 = extents.iter().product();
            (vol * vol * kappa * lambda, 0.0)
        }
        NormalizationMethod::LatticeSum => (lattice_sigma(model, window, m)?, 0.0),
        NormalizationMethod::WeightedNonstationary => {
            return Err(Error::Precondition(
                "weighted_nonstationary needs explicit ρ and a_1 handles; use sigma_nonstationary".into(),
            ))
        }
    };
    Ok(NormalizationPlan {
        m,
        window: window.clone(),
        method,
        value,
        error,
        centering: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::FnCovariance;
    use approx::assert_relative_eq;

    #[test]
    fn constant_covariance() {
        let one = FnCovariance::new(1, |_: &[f64]| 1.0);
        let e = sigma_stationary(&one, &[1.0], 1).unwrap();
        assert_relative_eq!(e.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fgn_half_closed_form_and_quadrature() {
        // ρ_{1/2} = 2(1 − |v|)^+; ∫ρ(2 − |v|) = 4∫_0^1 (1−v)(2−v) = 10/3
        assert_relative_eq!(fgn_variance_closed(0.5, 2.0).unwrap(), 10.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(fgn_primitive(0.5, 2.0).unwrap(), 2.0, epsilon = 1e-12);
        let m = CovarianceModel::FgnProduct { hurst: vec![0.5] };
        let q = sigma_stationary(&m, &[2.0], 1).unwrap();
        assert_relative_eq!(q.value, 0.5 * fgn_variance_closed(0.5, 2.0).unwrap(), max_relative = 1e-9);
        assert!(fgn_variance_closed(0.5, 1.0).is_err());
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for h in [0.3, 0.6, 0.8] {
            for r in [5.0, 50.0] {
                let m = CovarianceModel::FgnProduct { hurst: vec![h] };
                let q = sigma_stationary(&m, &[r], 1).unwrap();
                assert_relative_eq!(q.value, 0.5 * fgn_variance_closed(h, r).unwrap(), max_relative = 1e-8);
            }
        }
    }

    fn riemann_weighted(alpha: f64, r: f64, h: f64) -> f64 {
        let n = (2.0 * r / h).round() as usize;
        let mut acc = 0.0;
        for i in 0..n {
            let v = -r + (i as f64 + 0.5) * h;
            acc += crate::models::rho_alpha(alpha, v) * (r - v.abs());
        }
        acc * h
    }

    #[test]
    fn closed_form_vs_riemann() {
        assert_relative_eq!(
            fgn_variance_closed(0.5, 10.0).unwrap(),
            riemann_weighted(0.5, 10.0, 1e-4),
            max_relative = 1e-8
        );
        for alpha in [0.3, 0.5, 0.6, 0.8] {
            for r in [5.0, 50.0] {
                assert_relative_eq!(
                    fgn_variance_closed(alpha, r).unwrap(),
                    riemann_weighted(alpha, r, 1e-4),
                    max_relative = 1e-6
                );
            }
        }
        // weighted mean of ρ_α behaves like 2r^{2α−1}
        let r = 1e6;
        assert_relative_eq!(fgn_variance_closed(0.7, r).unwrap() / r / (2.0 * r.powf(0.4)), 1.0, max_relative = 1e-3);
    }

    #[test]
    fn power_law_asymptotic_limit() {
        let eta = 0.4;
        let m = CovarianceModel::PowerLawIso { eta, dim: 1 };
        let lead = 2f64.powf(2.0 - eta) * beta(2.0, 1.0 - eta);
        let mut prev = f64::INFINITY;
        for n in [1e3, 1e4, 1e5] {
            // one-sided integral over [0, 2n], i.e. the window [−n, n]
            let s = sigma_stationary(&m, &[2.0 * n], 1).unwrap().value / 2.0;
            let gap = (s / (lead * n.powf(2.0 - eta)) - 1.0).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 5e-3);
        let a = sigma_stationary(&m, &[1e4], 1).unwrap().value / 1e4f64.powf(2.0 - eta);
        let b = sigma_stationary(&m, &[1e5], 1).unwrap().value / 1e5f64.powf(2.0 - eta);
        assert!((a / b - 1.0).abs() < 0.02);
        assert_relative_eq!(power_law_asymptotic(eta, 2e5) / 2.0, lead * 1e5f64.powf(2.0 - eta), max_relative = 1e-12);
    }

    #[test]
    fn monotone_in_order() {
        let m = CovarianceModel::PowerLawIso { eta: 0.3, dim: 2 };
        let mut prev = f64::INFINITY;
        let mut fact = 1.0;
        for k in 1..=4 {
            fact *= k as f64;
            let v = sigma_stationary(&m, &[20.0, 20.0], k).unwrap().value / fact;
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn nonstationary_reduces_to_stationary() {
        let model = CovarianceModel::PowerLawIso { eta: 0.4, dim: 1 };
        let h = 0.02;
        let pts: Vec<Vec<f64>> = (0..250).map(|i| vec![(i as f64 + 0.5) * h]).collect();
        let c = crate::special::phi(0.7);
        let v = sigma_nonstationary(|t, s| model.eval_lag(&[t[0] - s[0]]), |_| c, &pts, h).unwrap();
        let q = sigma_stationary(&model, &[5.0], 1).unwrap().value;
        assert_relative_eq!(v, c * c * q, max_relative = 1e-4);
    }

    #[test]
    fn cauchy_exp_kappa_product() {
        let (alpha, c) = (0.2, 1.3);
        let k = kappa_constant(|v| v[0].abs().powf(-2.0 * alpha) * (-c * v[2].abs()).exp(), 3).unwrap();
        let kx = 2.0 * (1.0 / (1.0 - 2.0 * alpha) - 1.0 / (2.0 - 2.0 * alpha));
        let e = (-c).exp();
        let kz = 2.0 * ((1.0 - e) / c - (1.0 - e * (1.0 + c)) / (c * c));
        assert_relative_eq!(k, kx * kz, max_relative = 1e-6);
    }

    #[test]
    fn kappa_normalizer_cases() {
        let (_, k) = kappa_normalizer(|_| 1.0, 1, 1.0, 1.0).unwrap();
        assert_relative_eq!(k, 1.0, epsilon = 1e-10);
        let alpha = 0.25;
        let k = kappa_constant(|v| v[0].abs().powf(-2.0 * alpha), 1).unwrap();
        assert_relative_eq!(k, 8.0 / 3.0, max_relative = 1e-7);
    }

    #[test]
    fn nonstationary_examples() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.5]).collect();
        let v = sigma_nonstationary(|_, _| 1.0, |_| 0.3, &pts, 0.5).unwrap();
        assert_relative_eq!(v, 0.09 * 25.0, epsilon = 1e-12);
        assert_eq!(sigma_nonstationary(|_, _| 1.0, |_| 0.0, &pts, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn lattice_sum_matches_direct_double_sum() {
        let m = CovarianceModel::FgnProduct { hurst: vec![0.3, 0.8] };
        let g = GridSpec::with_mesh(&[6.0, 10.0], &[1.0, 2.5]);
        let nodes: Vec<Vec<f64>> = (0..g.total_nodes()).map(|i| g.node(i)).collect();
        for k in 1..=3 {
            let mut direct = 0.0;
            for a in &nodes {
                for b in &nodes {
                    let lag: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
                    direct += m.eval_lag(&lag).powi(k as i32);
                }
            }
            direct *= factorial(k) * g.cell_volume().powi(2);
            assert_relative_eq!(lattice_sigma(&m, &g, k).unwrap(), direct, max_relative = 1e-12);
        }
        // unit-mesh fGn sums have variance n^{2H}
        let f = CovarianceModel::FgnProduct { hurst: vec![0.3] };
        assert_relative_eq!(lattice_sigma(&f, &GridSpec::unit(&[64.0]), 1).unwrap(), 64f64.powf(0.6), max_relative = 1e-12);
    }

    #[test]
    fn plan_methods() {
        let m = CovarianceModel::FgnProduct { hurst: vec![0.7, 0.6] };
        let w = GridSpec::unit(&[20.0, 30.0]);
        let a = plan_sigma(&m, &w, 1, NormalizationMethod::ClosedFormFgn).unwrap();
        let b = plan_sigma(&m, &w, 1, NormalizationMethod::Quadrature).unwrap();
        assert_relative_eq!(a.value, b.value, max_relative = 1e-7);
        let p = CovarianceModel::PowerLawIso { eta: 0.4, dim: 1 };
        assert!(plan_sigma(&p, &w, 1, NormalizationMethod::ClosedFormFgn).is_err());
    }
}
