//! Sample summaries, least-squares fits and Kolmogorov–Smirnov tests.

use crate::error::{Error, Result};
use crate::normalizer::pairwise_sum;
use crate::special::norm_cdf;
use serde::{Deserialize, Serialize};

/// Minimum sample size accepted by the KS routines.
pub const KS_MIN_SAMPLES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares y = intercept + slope·x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: x.len(),
        });
    }
    let n = x.len() as f64;
    let mx = pairwise_sum(x) / n;
    let my = pairwise_sum(y) / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Degenerate("regressor has zero spread".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { (sxy * sxy / (sxx * syy)).min(1.0) } else { 1.0 };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Fit of ln y against ln x; all values must be positive.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Degenerate("log-log fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

pub fn moments(xs: &[f64]) -> Result<Moments> {
    if xs.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let c: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let pow = |k: i32| pairwise_sum(&c.iter().map(|v| v.powi(k)).collect::<Vec<_>>()) / n;
    let m2 = pow(2);
    let (m3, m4) = (pow(3), pow(4));
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Ok(Moments {
        mean,
        variance: m2 * n / (n - 1.0),
        skewness,
        excess_kurtosis,
    })
}

/// Reference law for a KS comparison.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference<'a> {
    StdNormal,
    /// Uniform on [0, 1/2].
    UniformHalf,
    Empirical(&'a [f64]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub distance: f64,
    pub p_value: f64,
}

/// Kolmogorov survival function Q(λ) = P(K > λ).
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series converges fast for small λ
        let pi2 = std::f64::consts::PI.powi(2);
        let mut s = 0.0;
        for k in 1..=8 {
            let j = (2 * k - 1) as f64;
            s += (-j * j * pi2 / (8.0 * lambda * lambda)).exp();
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=20 {
            let kf = k as f64;
            let t = (-2.0 * kf * kf * lambda * lambda).exp();
            s += if k % 2 == 1 { t } else { -t };
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = xs.iter().position(|v| v.is_nan()) {
        return Err(Error::NonFinite { index: i });
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// One- or two-sample KS distance with the asymptotic p-value.
pub fn ks_distance(samples: &[f64], reference: Reference<'_>) -> Result<KsResult> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: KS_MIN_SAMPLES,
            got: samples.len(),
        });
    }
    match reference {
        Reference::StdNormal => ks_one_sample(samples, norm_cdf),
        Reference::UniformHalf => ks_one_sample(samples, |x| (2.0 * x).clamp(0.0, 1.0)),
        Reference::Empirical(other) => ks_two_sample(samples, other),
    }
}

pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    let xs = sorted(samples)?;
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult {
        distance: d,
        p_value: kolmogorov_sf(n.sqrt() * d),
    })
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if b.len() < KS_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: KS_MIN_SAMPLES,
            got: b.len(),
        });
    }
    let xs = sorted(a)?;
    let ys = sorted(b)?;
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    Ok(KsResult {
        distance: d,
        p_value: kolmogorov_sf(en * d),
    })
}

/// 1% and 5% asymptotic one-sample critical values c/√n.
pub fn ks_critical(n: usize, level: f64) -> f64 {
    let c = if level <= 0.01 { 1.63 } else { 1.36 };
    c / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kolmogorov_values() {
        // tabulated quantiles of the Kolmogorov law
        assert_relative_eq!(kolmogorov_sf(1.358_098_8), 0.05, epsilon = 1e-6);
        assert_relative_eq!(kolmogorov_sf(1.627_624_3), 0.01, epsilon = 1e-6);
        assert_relative_eq!(kolmogorov_sf(1.0), 0.269_999_671_677_355_6, epsilon = 1e-9);
        // the two series agree at the switch point
        let lo = {
            let pi2 = std::f64::consts::PI.powi(2);
            let s: f64 = (1..=8).map(|k| (-((2 * k - 1) as f64).powi(2) * pi2 / (8.0 * 1.18f64.powi(2))).exp()).sum();
            1.0 - (2.0 * std::f64::consts::PI).sqrt() / 1.18 * s
        };
        assert_relative_eq!(lo, kolmogorov_sf(1.18), epsilon = 1e-12);
    }

    #[test]
    fn ks_examples() {
        let xs: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
        let same = ks_distance(&xs, Reference::Empirical(&xs)).unwrap();
        assert_eq!(same.distance, 0.0);
        assert_eq!(same.p_value, 1.0);
        let c = vec![0.0; 100];
        assert!(ks_distance(&c, Reference::StdNormal).unwrap().distance >= 0.5);
        assert!(matches!(
            ks_distance(&c[..10], Reference::StdNormal),
            Err(Error::TooFewSamples { .. })
        ));
        // exact quantiles of U[0, 1/2] give D = 1/n
        let u: Vec<f64> = (0..100).map(|i| (i as f64 + 1.0) / 200.0).collect();
        assert_relative_eq!(ks_distance(&u, Reference::UniformHalf).unwrap().distance, 0.01, epsilon = 1e-12);
    }

    #[test]
    fn fits_and_moments() {
        let x = [1.0, 10.0, 100.0, 1000.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.6)).collect();
        let f = loglog_fit(&x, &y).unwrap();
        assert_relative_eq!(f.slope, 1.6, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, 3f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
        let m = moments(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_relative_eq!(m.mean, 2.5);
        assert_relative_eq!(m.variance, 5.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(m.skewness, 0.0, epsilon = 1e-14);
        assert_relative_eq!(m.excess_kurtosis, -1.36, epsilon = 1e-12);
    }
}
