//! Covariance models, spectral densities and subordinators.

use crate::error::{invalid, Error, Result};
use crate::grid::FieldSample;
use serde::{Deserialize, Serialize};

/// A stationary covariance C(t) on R^d.
pub trait Covariance: Sync {
    fn dim(&self) -> usize;

    /// C at the lag vector `lag` (length `dim()`).
    fn eval_lag(&self, lag: &[f64]) -> f64;

    /// Nonnegative lags along `axis` where C has a kink (besides 0).
    fn kinks(&self, _axis: usize) -> Vec<f64> {
        Vec::new()
    }
}

fn default_dim() -> usize {
    1
}

/// The registered covariance kinds. All have C(0) = 1 and are even in
/// every coordinate separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovarianceModel {
    /// (1 + ‖t‖²)^{−η/2}.
    PowerLawIso {
        eta: f64,
        #[serde(default = "default_dim")]
        dim: usize,
    },
    /// e^{−|z|}(1 + x² + y²)^{−α} on R³.
    #[serde(rename = "example29_3d")]
    CauchyExp3d { alpha: f64 },
    /// 1/(|t|^{2α}+1) · exp(−‖x‖^{2γ}/(|t|^{2α}+1)^γ); time is the last coordinate.
    Gneiting {
        alpha: f64,
        gamma: f64,
        #[serde(default = "default_dim")]
        spatial_dim: usize,
    },
    /// C_s(x)·C_t(t), spatial coordinates first.
    Separable {
        spatial: Box<CovarianceModel>,
        temporal: Box<CovarianceModel>,
    },
    /// 2^{−d} ∏ ρ_{H_i}(t_i).
    FgnProduct { hurst: Vec<f64> },
    /// e^{−‖t‖/θ}.
    Exponential {
        theta: f64,
        #[serde(default = "default_dim")]
        dim: usize,
    },
}

/// ρ_α(s) = |s+1|^{2α} + |s−1|^{2α} − 2|s|^{2α}.
pub fn rho_alpha(alpha: f64, s: f64) -> f64 {
    let e = 2.0 * alpha;
    (s + 1.0).abs().powf(e) + (s - 1.0).abs().powf(e) - 2.0 * s.abs().powf(e)
}

impl CovarianceModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            CovarianceModel::PowerLawIso { eta, dim } => {
                if !(*eta > 0.0 && eta.is_finite()) {
                    return Err(invalid(format!("power_law_iso eta must be > 0, got {eta}")));
                }
                check_dim(*dim)
            }
            CovarianceModel::CauchyExp3d { alpha } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return Err(invalid(format!("example29_3d alpha must be > 0, got {alpha}")));
                }
                Ok(())
            }
            CovarianceModel::Gneiting {
                alpha,
                gamma,
                spatial_dim,
            } => {
                if !(*alpha > 0.0 && *alpha <= 1.0) || !(*gamma > 0.0 && *gamma <= 1.0) {
                    return Err(invalid("gneiting requires alpha, gamma in (0, 1]"));
                }
                check_dim(spatial_dim + 1)
            }
            CovarianceModel::Separable { spatial, temporal } => {
                spatial.validate()?;
                temporal.validate()?;
                check_dim(self.dim())
            }
            CovarianceModel::FgnProduct { hurst } => {
                if hurst.iter().any(|h| !(*h > 0.0 && *h < 1.0)) {
                    return Err(invalid("fgn_product Hurst indices must lie in (0, 1)"));
                }
                check_dim(hurst.len())
            }
            CovarianceModel::Exponential { theta, dim } => {
                if !(*theta > 0.0 && theta.is_finite()) {
                    return Err(invalid(format!("exponential theta must be > 0, got {theta}")));
                }
                check_dim(*dim)
            }
        }
    }

    /// Every registered kind is stationary.
    pub fn is_stationary(&self) -> bool {
        true
    }

    /// Short human-readable descriptor for reports.
    pub fn descriptor(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }

    /// Spectral density of the limiting kernel when C is a power law at
    /// infinity (used by the Hermite oracle).
    pub fn limit_spectral_density(&self) -> Option<SpectralDensity> {
        match self {
            CovarianceModel::PowerLawIso { eta, dim } if *eta < *dim as f64 => {
                if *dim == 1 {
                    Some(SpectralDensity::AnisotropicProduct { gammas: vec![*eta] })
                } else {
                    Some(SpectralDensity::IsotropicPowerlaw {
                        alpha: *eta,
                        dim: *dim,
                    })
                }
            }
            CovarianceModel::FgnProduct { hurst } if hurst.iter().all(|h| *h > 0.5) => {
                Some(SpectralDensity::AnisotropicProduct {
                    gammas: hurst.iter().map(|h| 2.0 - 2.0 * h).collect(),
                })
            }
            _ => None,
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > 3 {
        return Err(invalid(format!("dimension must be 1..=3, got {d}")));
    }
    Ok(())
}

impl Covariance for CovarianceModel {
    fn dim(&self) -> usize {
        match self {
            CovarianceModel::PowerLawIso { dim, .. } | CovarianceModel::Exponential { dim, .. } => *dim,
            CovarianceModel::CauchyExp3d { .. } => 3,
            CovarianceModel::Gneiting { spatial_dim, .. } => spatial_dim + 1,
            CovarianceModel::Separable { spatial, temporal } => spatial.dim() + temporal.dim(),
            CovarianceModel::FgnProduct { hurst } => hurst.len(),
        }
    }

    fn eval_lag(&self, t: &[f64]) -> f64 {
        match self {
            CovarianceModel::PowerLawIso { eta, .. } => {
                let r2: f64 = t.iter().map(|x| x * x).sum();
                (1.0 + r2).powf(-0.5 * eta)
            }
            CovarianceModel::CauchyExp3d { alpha } => {
                (-t[2].abs()).exp() * (1.0 + t[0] * t[0] + t[1] * t[1]).powf(-alpha)
            }
            CovarianceModel::Gneiting {
                alpha,
                gamma,
                spatial_dim,
            } => {
                let tt = t[*spatial_dim].abs();
                let x2: f64 = t[..*spatial_dim].iter().map(|x| x * x).sum();
                let psi = tt.powf(2.0 * alpha) + 1.0;
                (-x2.powf(*gamma) / psi.powf(*gamma)).exp() / psi
            }
            CovarianceModel::Separable { spatial, temporal } => {
                let ds = spatial.dim();
                spatial.eval_lag(&t[..ds]) * temporal.eval_lag(&t[ds..])
            }
            CovarianceModel::FgnProduct { hurst } => hurst
                .iter()
                .zip(t)
                .map(|(h, x)| 0.5 * rho_alpha(*h, *x))
                .product(),
            CovarianceModel::Exponential { theta, .. } => {
                let r: f64 = t.iter().map(|x| x * x).sum::<f64>().sqrt();
                (-r / theta).exp()
            }
        }
    }

    fn kinks(&self, axis: usize) -> Vec<f64> {
        match self {
            CovarianceModel::FgnProduct { .. } => vec![1.0],
            CovarianceModel::Separable { spatial, temporal } => {
                let ds = spatial.dim();
                if axis < ds {
                    spatial.kinks(axis)
                } else {
                    temporal.kinks(axis - ds)
                }
            }
            _ => Vec::new(),
        }
    }
}

/// A covariance given by a closure, for tests and ad-hoc checks.
pub struct FnCovariance<F: Fn(&[f64]) -> f64 + Sync> {
    pub dim: usize,
    pub f: F,
    pub kinks: Vec<f64>,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnCovariance<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnCovariance {
            dim,
            f,
            kinks: Vec::new(),
        }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Covariance for FnCovariance<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval_lag(&self, lag: &[f64]) -> f64 {
        (self.f)(lag)
    }
    fn kinks(&self, _axis: usize) -> Vec<f64> {
        self.kinks.clone()
    }
}

/// ρ(t, s) for a stationary model: C(t − s).
pub fn cov_eval<C: Covariance + ?Sized>(model: &C, t: &[f64], s: &[f64]) -> Result<f64> {
    let d = model.dim();
    for v in [t, s] {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.len(),
            });
        }
    }
    let lag: Vec<f64> = t.iter().zip(s).map(|(a, b)| a - b).collect();
    Ok(model.eval_lag(&lag))
}

/// Spectral densities with slowly varying factors fixed to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpectralDensity {
    /// ‖z‖^{α−d}.
    IsotropicPowerlaw { alpha: f64, dim: usize },
    /// ∏ |z_l|^{γ_l − 1}.
    AnisotropicProduct { gammas: Vec<f64> },
    /// (x² + c|y|^{2H₂/H₁})^{−H₁/2} on R².
    TwoParamScaling { h1: f64, h2: f64, c: f64 },
}

impl SpectralDensity {
    pub fn dim(&self) -> usize {
        match self {
            SpectralDensity::IsotropicPowerlaw { dim, .. } => *dim,
            SpectralDensity::AnisotropicProduct { gammas } => gammas.len(),
            SpectralDensity::TwoParamScaling { .. } => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpectralDensity::IsotropicPowerlaw { alpha, dim } => {
                check_dim(*dim)?;
                if !(*alpha > 0.0 && *alpha < *dim as f64) {
                    return Err(invalid("isotropic_powerlaw requires 0 < alpha < d"));
                }
            }
            SpectralDensity::AnisotropicProduct { gammas } => {
                check_dim(gammas.len())?;
                if gammas.iter().any(|g| !(*g > 0.0 && *g < 1.0)) {
                    return Err(invalid("anisotropic_product exponents must lie in (0, 1)"));
                }
            }
            SpectralDensity::TwoParamScaling { h1, h2, c } => {
                if !(*h1 > 0.0 && *h2 > 0.0 && *c > 0.0) {
                    return Err(invalid("two_param_scaling requires positive parameters"));
                }
            }
        }
        Ok(())
    }

    /// Square-integrability condition of the rank-m kernel for product
    /// densities: every γ_l must lie in (0, 1/m).
    pub fn check_rank(&self, m: usize) -> Result<()> {
        let bound = 1.0 / m as f64;
        let ok = match self {
            SpectralDensity::AnisotropicProduct { gammas } => gammas.iter().all(|g| *g > 0.0 && *g < bound),
            SpectralDensity::IsotropicPowerlaw { alpha, dim } => *alpha > 0.0 && *alpha < *dim as f64 * bound,
            SpectralDensity::TwoParamScaling { .. } => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "spectral exponents violate the rank-{m} integrability bound"
            )))
        }
    }

    /// Average of g over the axis-aligned cell [lo, hi]; exact for the
    /// product kind, Gauss–Legendre otherwise.
    pub fn cell_average(&self, lo: &[f64], hi: &[f64]) -> f64 {
        match self {
            SpectralDensity::AnisotropicProduct { gammas } => gammas
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(g, (a, b))| abs_power_average(*g, *a, *b))
                .product(),
            _ => {
                let d = lo.len();
                let (x, w) = crate::quadrature::gauss_legendre(8);
                let n = x.len();
                let total = n.pow(d as u32);
                let mut acc = 0.0;
                let mut pt = vec![0.0; d];
                for idx in 0..total {
                    let mut rem = idx;
                    let mut wt = 1.0;
                    for l in 0..d {
                        let i = rem % n;
                        rem /= n;
                        pt[l] = 0.5 * (lo[l] + hi[l]) + 0.5 * (hi[l] - lo[l]) * x[i];
                        wt *= 0.5 * w[i];
                    }
                    acc += wt * self.eval_unchecked(&pt);
                }
                acc
            }
        }
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            SpectralDensity::IsotropicPowerlaw { alpha, dim } => {
                let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                r.powf(alpha - *dim as f64)
            }
            SpectralDensity::AnisotropicProduct { gammas } => {
                gammas.iter().zip(x).map(|(g, v)| v.abs().powf(g - 1.0)).product()
            }
            SpectralDensity::TwoParamScaling { h1, h2, c } => {
                (x[0] * x[0] + c * x[1].abs().powf(2.0 * h2 / h1)).powf(-0.5 * h1)
            }
        }
    }
}

/// (1/(b−a)) ∫_a^b |y|^{γ−1} dy for a < b.
fn abs_power_average(g: f64, a: f64, b: f64) -> f64 {
    let prim = |y: f64| y.signum() * y.abs().powf(g) / g;
    (prim(b) - prim(a)) / (b - a)
}

/// g(x), with a pole error at singular points.
pub fn spectral_eval(density: &SpectralDensity, x: &[f64]) -> Result<f64> {
    if x.len() != density.dim() {
        return Err(Error::DimensionMismatch {
            expected: density.dim(),
            got: x.len(),
        });
    }
    let singular = match density {
        SpectralDensity::IsotropicPowerlaw { alpha, dim } => {
            *alpha < *dim as f64 && x.iter().all(|v| *v == 0.0)
        }
        SpectralDensity::AnisotropicProduct { gammas } => {
            gammas.iter().zip(x).any(|(g, v)| *g < 1.0 && *v == 0.0)
        }
        SpectralDensity::TwoParamScaling { .. } => x.iter().all(|v| *v == 0.0),
    };
    if singular {
        return Err(Error::Pole);
    }
    Ok(density.eval_unchecked(x))
}

/// A branch of the two-branch subordinator, evaluated at |x|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Branch {
    /// intercept + slope·|x|
    Linear { intercept: f64, slope: f64 },
    /// scale·e^{rate(|x|−1)}
    Exponential { scale: f64, rate: f64 },
}

impl Branch {
    fn eval(&self, ax: f64) -> f64 {
        match self {
            Branch::Linear { intercept, slope } => intercept + slope * ax,
            Branch::Exponential { scale, rate } => scale * (rate * (ax - 1.0)).exp(),
        }
    }
}

/// Pointwise transforms f applied to the Gaussian field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Subordinator {
    Identity,
    /// x + βx³
    Cubic { beta: f64 },
    /// x + a(x² − 1)
    Quadratic { a: f64 },
    /// e^x
    Lognormal,
    /// sgn(x)(e^{x²/β²} − 1)
    SignedExp { beta: f64 },
    /// x²
    Square,
    /// f_1(|x|) on |x| ≤ 1, f_2(|x|) on |x| > 1
    TwoBranch { inner: Branch, outer: Branch },
}

impl Subordinator {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Subordinator::Identity => x,
            Subordinator::Cubic { beta } => x + beta * x * x * x,
            Subordinator::Quadratic { a } => x + a * (x * x - 1.0),
            Subordinator::Lognormal => x.exp(),
            Subordinator::SignedExp { beta } => {
                if x == 0.0 {
                    0.0
                } else {
                    x.signum() * ((x * x / (beta * beta)).exp() - 1.0)
                }
            }
            Subordinator::Square => x * x,
            Subordinator::TwoBranch { inner, outer } => {
                let ax = x.abs();
                if ax <= 1.0 {
                    inner.eval(ax)
                } else {
                    outer.eval(ax)
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Subordinator::SignedExp { beta } if !(*beta > 0.0) => {
                Err(invalid("signed_exp requires beta > 0"))
            }
            Subordinator::Cubic { beta } | Subordinator::Quadratic { a: beta } if !beta.is_finite() => {
                Err(invalid("parameter must be finite"))
            }
            _ => Ok(()),
        }
    }

    /// Nondecreasing on the whole line.
    pub fn is_monotone(&self) -> bool {
        match self {
            Subordinator::Identity | Subordinator::Lognormal | Subordinator::SignedExp { .. } => true,
            Subordinator::Cubic { beta } => *beta >= 0.0,
            Subordinator::Quadratic { a } => *a == 0.0,
            Subordinator::Square | Subordinator::TwoBranch { .. } => false,
        }
    }

    /// f(−x) = f(x).
    pub fn is_even(&self) -> bool {
        matches!(self, Subordinator::Square | Subordinator::TwoBranch { .. })
    }

    /// Points splitting the line into pieces on which f is monotone.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Subordinator::Quadratic { a } if *a != 0.0 => vec![-0.5 / a],
            Subordinator::Cubic { beta } if *beta < 0.0 => {
                let z = (-1.0 / (3.0 * beta)).sqrt();
                vec![-z, z]
            }
            Subordinator::Square => vec![0.0],
            Subordinator::TwoBranch { .. } => vec![-1.0, 0.0, 1.0],
            _ => Vec::new(),
        }
    }

    pub fn descriptor(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }

    /// Parses the compact command-line form: `identity`, `square`,
    /// `lognormal`, `cubic:β`, `quadratic:a`, `signed_exp:β`.
    pub fn parse_compact(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = || -> Result<f64> {
            arg.ok_or_else(|| invalid(format!("subordinator '{name}' needs a parameter")))?
                .parse::<f64>()
                .map_err(|e| invalid(format!("bad parameter for '{name}': {e}")))
        };
        let f = match name {
            "identity" => Subordinator::Identity,
            "square" => Subordinator::Square,
            "lognormal" => Subordinator::Lognormal,
            "cubic" => Subordinator::Cubic { beta: num()? },
            "quadratic" => Subordinator::Quadratic { a: num()? },
            "signed_exp" => Subordinator::SignedExp { beta: num()? },
            other => return Err(invalid(format!("unknown subordinator '{other}'"))),
        };
        f.validate()?;
        Ok(f)
    }
}

/// X = f(Y) pointwise. Infinite outputs are saturated to ±f64::MAX and
/// counted in `saturated`; the descriptor records f.
pub fn subordinate(f: &Subordinator, sample: &FieldSample) -> Result<FieldSample> {
    let mut saturated = sample.saturated;
    let mut values = Vec::with_capacity(sample.values.len());
    for (i, &y) in sample.values.iter().enumerate() {
        if !y.is_finite() {
            return Err(Error::NonFinite { index: i });
        }
        let mut x = f.eval(y);
        if x.is_infinite() {
            x = x.signum() * f64::MAX;
            saturated += 1;
        }
        values.push(x);
    }
    Ok(FieldSample {
        values,
        saturated,
        model: format!("{} | f={}", sample.model, f.descriptor()),
        ..sample.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn subordinate_saturates_overflow() {
        let s = FieldSample {
            grid: crate::grid::GridSpec::unit(&[3.0]),
            values: vec![0.0, 40.0, -40.0],
            seed: 0,
            replicate: 0,
            model: "m".into(),
            approximate: false,
            saturated: 0,
        };
        let out = subordinate(&Subordinator::SignedExp { beta: 1.0 }, &s).unwrap();
        assert_eq!(out.values, vec![0.0, f64::MAX, -f64::MAX]);
        assert_eq!(out.saturated, 2);
        let same = subordinate(&Subordinator::Identity, &s).unwrap();
        assert_eq!(same.values, s.values);
    }

    #[test]
    fn covariance_examples() {
        let fgn = CovarianceModel::FgnProduct { hurst: vec![0.75] };
        assert_relative_eq!(cov_eval(&fgn, &[0.3], &[0.3]).unwrap(), 1.0);
        let g = CovarianceModel::Gneiting {
            alpha: 0.5,
            gamma: 0.5,
            spatial_dim: 1,
        };
        assert_relative_eq!(cov_eval(&g, &[0.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
        let ce3 = CovarianceModel::CauchyExp3d { alpha: 0.4 };
        assert_relative_eq!(
            cov_eval(&ce3, &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]).unwrap(),
            0.757_858_283_255_199,
            epsilon = 1e-12
        );
        assert!(matches!(
            cov_eval(&ce3, &[1.0], &[0.0]),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn rho_alpha_examples() {
        for a in [0.1, 0.5, 0.9] {
            assert_relative_eq!(rho_alpha(a, 0.0), 2.0);
        }
        for s in [1.0, 2.5, 7.0] {
            assert_relative_eq!(rho_alpha(0.5, s), 0.0, epsilon = 1e-12);
        }
        assert_relative_eq!(rho_alpha(0.75, 1.0), 0.828_427_124_746_190_1, epsilon = 1e-12);
    }

    #[test]
    fn spectral_examples() {
        let a = SpectralDensity::AnisotropicProduct { gammas: vec![0.3] };
        assert_relative_eq!(spectral_eval(&a, &[2.0]).unwrap(), 0.615_572_206_672_458_3, epsilon = 1e-12);
        let i = SpectralDensity::IsotropicPowerlaw { alpha: 0.5, dim: 2 };
        assert_relative_eq!(spectral_eval(&i, &[0.6, 0.8]).unwrap(), 1.0, epsilon = 1e-12);
        let t = SpectralDensity::TwoParamScaling { h1: 1.0, h2: 1.0, c: 1.0 };
        assert_relative_eq!(spectral_eval(&t, &[1.0, 1.0]).unwrap(), 2f64.powf(-0.5), epsilon = 1e-12);
        assert_eq!(spectral_eval(&a, &[0.0]), Err(Error::Pole));
        assert_eq!(spectral_eval(&i, &[0.0, 0.0]), Err(Error::Pole));
    }

    #[test]
    fn cell_average_product_is_exact() {
        let a = SpectralDensity::AnisotropicProduct { gammas: vec![0.4] };
        // (1/1) ∫_0^1 y^{-0.6} dy = 1/0.4
        assert_relative_eq!(a.cell_average(&[0.0], &[1.0]), 2.5, epsilon = 1e-12);
        assert_relative_eq!(a.cell_average(&[-1.0], &[0.0]), 2.5, epsilon = 1e-12);
        assert_relative_eq!(a.cell_average(&[-1.0], &[1.0]), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn subordinator_examples() {
        assert_eq!(Subordinator::Quadratic { a: 1.0 }.eval(0.0), -1.0);
        assert_eq!(Subordinator::Cubic { beta: 2.0 }.eval(1.0), 3.0);
        assert_eq!(Subordinator::Identity.eval(-0.25), -0.25);
        assert!(Subordinator::Square.is_even());
        assert!(Subordinator::Identity.is_monotone());
        assert!(!Subordinator::Square.is_monotone());
    }

    #[test]
    fn serde_rejects_unknown_fields() {
        let ok: CovarianceModel = serde_json::from_str(r#"{"kind":"power_law_iso","eta":0.4}"#).unwrap();
        assert_eq!(ok, CovarianceModel::PowerLawIso { eta: 0.4, dim: 1 });
        let bad = serde_json::from_str::<CovarianceModel>(r#"{"kind":"power_law_iso","eta":0.4,"etta":1}"#);
        assert!(bad.is_err());
        let ce3: CovarianceModel = serde_json::from_str(r#"{"kind":"example29_3d","alpha":0.4}"#).unwrap();
        assert_eq!(ce3, CovarianceModel::CauchyExp3d { alpha: 0.4 });
    }
}
