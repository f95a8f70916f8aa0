//! Hermite polynomials, Hermite coefficients of level indicators, and
//! Hermite rank detection.

use crate::error::{Error, Result};
use crate::models::Subordinator;
use crate::quadrature::gauss_legendre_cached;
use crate::special::{phi, psi};
use serde::{Deserialize, Serialize};

/// Largest supported polynomial order.
pub const MAX_ORDER: usize = 60;
/// Default tolerance on |⟨F_u, H_k⟩| for rank detection.
pub const RANK_TOL: f64 = 1e-8;
/// Default search cap for rank detection.
pub const RANK_KMAX: usize = 12;

/// Integration is clipped to |x| ≤ CLIP; φ(CLIP)·h_k(CLIP) underflows for k ≤ 60.
const CLIP: f64 = 40.0;
const CONVERGED: f64 = 1e-10;
const ACCEPTABLE: f64 = 1e-9;

/// A threshold u.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level(f64);

impl Level {
    pub fn new(u: f64) -> Result<Self> {
        if !u.is_finite() {
            return Err(Error::InvalidParameter(format!("level must be finite, got {u}")));
        }
        Ok(Level(u))
    }
    pub fn value(self) -> f64 {
        self.0
    }
}

/// H_k(x) by the three-term recurrence.
pub fn hermite_eval(k: usize, x: f64) -> Result<f64> {
    if k > MAX_ORDER {
        return Err(Error::Range {
            what: "Hermite order",
            detail: format!("{k} > {MAX_ORDER}"),
        });
    }
    let mut prev = 1.0;
    if k == 0 {
        return Ok(prev);
    }
    let mut cur = x;
    for j in 1..k {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// H_k(x)/sqrt(k!) without overflow.
fn hermite_normalized(k: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for j in 0..k {
        let next = (x * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// inf{y ∈ [lo, hi] : f(y) ≥ u} for f nondecreasing on [lo, hi], by
/// bisection to 1e−12. Returns −∞ if f(lo) ≥ u and +∞ if f(hi) < u.
pub fn generalized_inverse(f: &Subordinator, u: f64, lo: f64, hi: f64) -> f64 {
    if f.eval(lo) >= u {
        return f64::NEG_INFINITY;
    }
    if f.eval(hi) < u {
        return f64::INFINITY;
    }
    bisect(|y| f.eval(y) >= u, lo, hi)
}

/// Smallest point of [lo, hi] where the monotone predicate turns true,
/// given pred(lo) = false and pred(hi) = true.
fn bisect<P: Fn(f64) -> bool>(pred: P, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 || mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Intervals (in standardized units x) making up {x : f(σx) ≥ u} ∩ [−40, 40].
pub fn excursion_intervals(f: &Subordinator, u: f64, sigma: f64) -> Vec<(f64, f64)> {
    let mut cuts = vec![-CLIP];
    for b in f.breakpoints() {
        let x = b / sigma;
        if x > -CLIP && x < CLIP {
            cuts.push(x);
        }
    }
    cuts.push(CLIP);
    let inside = |x: f64| f.eval(sigma * x) >= u;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for w in cuts.windows(2) {
        let (p, q) = (w[0], w[1]);
        let eps = 1e-13 * p.abs().max(q.abs()).max(1.0);
        let (pi, qi) = (p + eps, q - eps);
        let (ip, iq) = (inside(pi), inside(qi));
        let piece = match (ip, iq) {
            (true, true) => Some((p, q)),
            (false, false) => None,
            (false, true) => Some((bisect(inside, pi, qi), q)),
            (true, false) => Some((p, bisect(|x| !inside(x), pi, qi))),
        };
        if let Some((a, b)) = piece {
            match out.last_mut() {
                Some(last) if last.1 == a => last.1 = b,
                _ => out.push((a, b)),
            }
        }
    }
    out
}

/// ∫_a^b h_k φ by composite Gauss–Legendre on unit-width panels with
/// node doubling. Returns (value, last change).
fn integrate_hk(k: usize, a: f64, b: f64) -> (f64, f64) {
    let panels = ((b - a).ceil() as usize).max(1);
    let width = (b - a) / panels as f64;
    let rule = |p: usize| -> f64 {
        let (x, w) = gauss_legendre_cached(p);
        let mut total = 0.0;
        for j in 0..panels {
            let lo = a + j as f64 * width;
            let c = lo + 0.5 * width;
            let mut s = 0.0;
            for (xi, wi) in x.iter().zip(w) {
                let t = c + 0.5 * width * xi;
                s += wi * hermite_normalized(k, t) * phi(t);
            }
            total += 0.5 * width * s;
        }
        total
    };
    let mut prev = rule(3);
    let mut change = f64::INFINITY;
    for p in 4..=9 {
        let cur = rule(p);
        change = (cur - prev).abs();
        prev = cur;
        if change < CONVERGED {
            break;
        }
    }
    (prev, change)
}

fn check_args(u: f64, sigma: f64, k: usize) -> Result<()> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
    }
    Level::new(u)?;
    if k > MAX_ORDER {
        return Err(Error::Range {
            what: "Hermite order",
            detail: format!("{k} > {MAX_ORDER}"),
        });
    }
    Ok(())
}

/// a_k = (k!)^{−1/2} ∫ 1{f(σx) ≥ u} H_k(x) φ(x) dx.
///
/// Monotone nondecreasing f with k ≤ 1 use the closed forms
/// a_0 = Ψ(f⁻(u)/σ) and a_1 = φ(f⁻(u)/σ); everything else integrates over
/// the excursion intervals.
pub fn hermite_coefficient(f: &Subordinator, u: f64, sigma: f64, k: usize) -> Result<f64> {
    check_args(u, sigma, k)?;
    if f.is_monotone() && k <= 1 {
        let c = generalized_inverse(f, u, -CLIP * sigma, CLIP * sigma) / sigma;
        return Ok(if k == 0 { psi(c) } else if c.is_finite() { phi(c) } else { 0.0 });
    }
    quadrature_coefficient(f, u, sigma, k)
}

/// Quadrature path of `hermite_coefficient`, usable for any f.
pub fn quadrature_coefficient(f: &Subordinator, u: f64, sigma: f64, k: usize) -> Result<f64> {
    check_args(u, sigma, k)?;
    let mut total = 0.0;
    let mut err = 0.0;
    for (a, b) in excursion_intervals(f, u, sigma) {
        let (v, e) = integrate_hk(k, a, b);
        total += v;
        err += e;
    }
    if err > ACCEPTABLE {
        return Err(Error::Accuracy {
            estimate: err,
            tolerance: ACCEPTABLE,
            context: format!("Hermite coefficient of order {k}"),
        });
    }
    Ok(total)
}

/// ⟨F_u, H_k⟩_φ = sqrt(k!)·a_k.
pub fn inner_product(f: &Subordinator, u: f64, sigma: f64, k: usize) -> Result<f64> {
    let a = hermite_coefficient(f, u, sigma, k)?;
    Ok(a * (1..=k).map(|j| j as f64).product::<f64>().sqrt())
}

/// Outcome of a rank search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    /// Smallest k ≥ 1 with |⟨F_u, H_k⟩| > tol; `None` means undetected.
    pub rank: Option<usize>,
    /// ⟨F_u, H_k⟩ for k = 1..=k_max searched so far.
    pub inner_products: Vec<f64>,
}

pub fn hermite_rank(f: &Subordinator, u: f64, sigma: f64, tol: f64) -> Result<RankResult> {
    hermite_rank_capped(f, u, sigma, tol, RANK_KMAX)
}

pub fn hermite_rank_capped(f: &Subordinator, u: f64, sigma: f64, tol: f64, k_max: usize) -> Result<RankResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("rank tolerance must be > 0".into()));
    }
    let mut products = Vec::new();
    for k in 1..=k_max {
        let ip = inner_product(f, u, sigma, k)?;
        products.push(ip);
        if ip.abs() > tol {
            return Ok(RankResult {
                rank: Some(k),
                inner_products: products,
            });
        }
    }
    Ok(RankResult {
        rank: None,
        inner_products: products,
    })
}

/// Coefficients a_0..a_K together with the detected rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteProfile {
    pub coefficients: Vec<f64>,
    pub truncation: usize,
    pub level: f64,
    pub sigma: f64,
    pub rank: Option<usize>,
}

impl HermiteProfile {
    pub fn compute(f: &Subordinator, u: f64, sigma: f64, truncation: usize) -> Result<Self> {
        let coefficients = (0..=truncation)
            .map(|k| hermite_coefficient(f, u, sigma, k))
            .collect::<Result<Vec<_>>>()?;
        let mut rank = None;
        let mut fact = 1.0f64;
        for (k, a) in coefficients.iter().enumerate().skip(1) {
            fact *= k as f64;
            if (a * fact.sqrt()).abs() > RANK_TOL {
                rank = Some(k);
                break;
            }
        }
        Ok(HermiteProfile {
            coefficients,
            truncation,
            level: u,
            sigma,
            rank,
        })
    }

    /// Σ_{k ≤ K} a_k².
    pub fn partial_energy(&self, k: usize) -> f64 {
        self.coefficients[..=k.min(self.truncation)].iter().map(|a| a * a).sum()
    }
}
