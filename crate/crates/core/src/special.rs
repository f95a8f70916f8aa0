//! Normal-law helpers and the few special functions the kernels need.

use statrs::function::erf::erfc_inv;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

/// 1/sqrt(2π).
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density φ.
pub fn phi(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal upper tail Ψ(x) = P(N(0,1) > x).
pub fn psi(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return 1.0;
    }
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal distribution function Φ.
pub fn norm_cdf(x: f64) -> f64 {
    psi(-x)
}

/// Inverse of the upper tail: returns x with Ψ(x) = p, for p in (0,1).
///
/// Starts from the series inverse and polishes with two Newton steps on Ψ.
pub fn psi_inv(p: f64) -> f64 {
    let mut x = SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    for _ in 0..2 {
        let d = phi(x);
        if d <= 0.0 {
            break;
        }
        x += (psi(x) - p) / d;
    }
    x
}

/// Γ(x).
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Beta function B(a, b).
pub fn beta(a: f64, b: f64) -> f64 {
    (libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b)).exp()
}

/// Generalized binomial coefficient binom(a, k) for real a.
pub fn binom_real(a: f64, k: u32) -> f64 {
    let mut out = 1.0;
    for i in 0..k {
        out *= (a - i as f64) / (i as f64 + 1.0);
    }
    out
}

/// Bessel function of the first kind J_ν for ν ∈ {1/2, 1, 3/2}, x ≥ 0.
///
/// Half-integer orders use the spherical closed forms; J_1 uses the
/// trapezoidal rule on Bessel's integral, which is spectrally accurate
/// for periodic integrands.
pub fn bessel_j(nu2: u32, x: f64) -> f64 {
    match nu2 {
        1 => {
            if x == 0.0 {
                return 0.0;
            }
            (2.0 / (PI * x)).sqrt() * x.sin()
        }
        2 => {
            let m = (x.abs() as usize + 40).next_power_of_two();
            let mut acc = 0.0;
            for j in 0..m {
                let tau = 2.0 * PI * j as f64 / m as f64;
                acc += (tau - x * tau.sin()).cos();
            }
            acc / m as f64
        }
        3 => {
            if x < 1e-3 {
                let s = (2.0 / PI).sqrt();
                return s * x.sqrt() * x / 3.0 * (1.0 - x * x / 10.0);
            }
            (2.0 / (PI * x)).sqrt() * (x.sin() / x - x.cos())
        }
        _ => panic!("bessel_j supports orders 1/2, 1 and 3/2 only"),
    }
}

/// Volume of the unit ball in R^d.
pub fn unit_ball_volume(d: usize) -> f64 {
    PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0 + 1.0)
}

/// Fourier transform of the unit-ball indicator, (2π)^{d/2} J_{d/2}(r) / r^{d/2}.
pub fn ball_kernel(d: usize, r: f64) -> f64 {
    let nu = d as f64 / 2.0;
    if r < 1e-4 {
        let lead = unit_ball_volume(d);
        return lead * (1.0 - r * r / (2.0 * (d as f64 + 2.0)));
    }
    (2.0 * PI).powf(nu) * bessel_j(d as u32, r) / r.powf(nu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn tail_and_inverse() {
        assert_relative_eq!(psi(0.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(psi(1.959963984540054), 0.025, max_relative = 1e-14);
        assert_relative_eq!(psi(1.0), 0.158_655_253_931_457_07, max_relative = 1e-14);
        assert_relative_eq!(psi(-0.3), 0.617_911_422_188_952_6, max_relative = 1e-14);
        assert_relative_eq!(psi(5.0), 2.866_515_718_791_933e-7, max_relative = 1e-13);
        for &p in &[1e-6, 0.01, 0.3, 0.5, 0.9] {
            assert_relative_eq!(psi(psi_inv(p)), p, max_relative = 1e-13);
        }
        assert_relative_eq!(beta(2.0, 0.6), 1.0 / (0.6 * 1.6), max_relative = 1e-13);
    }

    #[test]
    fn bessel_values() {
        // tabulated J_1 values
        assert_relative_eq!(bessel_j(2, 1.0), 0.440_050_585_744_933_5, epsilon = 1e-13);
        assert_relative_eq!(bessel_j(2, 10.0), 0.043_472_746_168_861_44, epsilon = 1e-13);
        assert_relative_eq!(bessel_j(2, 0.0), 0.0, epsilon = 1e-15);
        assert_relative_eq!(bessel_j(3, 2.0), 0.491_293_778_687_162_7, epsilon = 1e-13);
    }

    #[test]
    fn ball_kernel_limits() {
        assert_relative_eq!(ball_kernel(1, 0.0), 2.0, epsilon = 1e-12);
        assert_relative_eq!(ball_kernel(2, 0.0), PI, epsilon = 1e-12);
        assert_relative_eq!(ball_kernel(3, 0.0), 4.0 * PI / 3.0, epsilon = 1e-12);
        // d = 1: 2 sin(x)/x
        assert_relative_eq!(ball_kernel(1, 1.3), 2.0 * 1.3f64.sin() / 1.3, epsilon = 1e-13);
        // continuity across the series switch
        for d in 1..=3 {
            assert_relative_eq!(ball_kernel(d, 0.99e-4), ball_kernel(d, 1.01e-4), max_relative = 1e-8);
        }
    }
}
