//! Quadrature rules: Gauss–Legendre, probabilists' Gauss–Hermite, and a
//! globally adaptive Gauss–Kronrod (7/15) integrator with nested
//! (tensorized) use for box integrals.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use std::cell::Cell;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Value and absolute error estimate of an integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = resk * h;
    let resasc = resasc * h.abs();
    let resabs = resabs * h.abs();
    let mut err = ((resk - resg) * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (result, err)
}

/// Tolerances and subdivision budget for adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-13,
            rel: 1e-10,
            max_intervals: 4000,
        }
    }
}

/// Globally adaptive integration over consecutive breakpoints.
///
/// `points` must be sorted; the integrand is never evaluated at the
/// breakpoints themselves, so integrable endpoint singularities are fine.
pub fn integrate<F: Fn(f64) -> f64>(f: F, points: &[f64], tol: Tolerance) -> Estimate {
    let mut heap: BinaryHeap<Piece> = BinaryHeap::with_capacity(points.len() * 4);
    let mut err = 0.0;
    let mut total = 0.0;
    for w in points.windows(2) {
        if w[1] > w[0] {
            let (value, error) = gk15(&f, w[0], w[1]);
            total += value;
            err += error;
            heap.push(Piece {
                a: w[0],
                b: w[1],
                value,
                error,
            });
        }
    }
    while err > tol.abs.max(tol.rel * total.abs()) && heap.len() < tol.max_intervals {
        let Some(p) = heap.pop() else { break };
        let mid = 0.5 * (p.a + p.b);
        if p.error == 0.0 || mid <= p.a || mid >= p.b {
            // interval cannot be split further in floating point
            err -= p.error;
            heap.push(Piece { error: 0.0, ..p });
            if heap.peek().is_none_or(|q| q.error == 0.0) {
                break;
            }
            continue;
        }
        let (v1, e1) = gk15(&f, p.a, mid);
        let (v2, e2) = gk15(&f, mid, p.b);
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Piece {
            a: p.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Piece {
            a: mid,
            b: p.b,
            value: v2,
            error: e2,
        });
    }
    // resum in breakpoint order to drop drift from the running totals
    let mut pieces = heap.into_vec();
    pieces.sort_by(|x, y| x.a.total_cmp(&y.a));
    Estimate {
        value: pieces.iter().map(|p| p.value).sum(),
        error: pieces.iter().map(|p| p.error).sum(),
    }
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Breakpoints on [0, r] graded toward 0 with exponent 2, merged with
/// extra kink locations that fall inside the interval.
pub fn graded_points(r: f64, panels: usize, extra: &[f64]) -> Vec<f64> {
    let mut pts: Vec<f64> = (0..=panels)
        .map(|i| {
            let s = i as f64 / panels as f64;
            r * s * s
        })
        .collect();
    for &e in extra {
        if e > 0.0 && e < r {
            pts.push(e);
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}

/// Iterated adaptive integral of `f` over the box with per-axis breakpoints.
///
/// Inner integrals are computed to a tighter relative tolerance than the
/// outer one; the returned error combines the outer estimate with the
/// worst relative inner error.
pub fn integrate_box<F: Fn(&[f64]) -> f64>(f: &F, axes: &[Vec<f64>], tol: Tolerance) -> Estimate {
    let worst_inner = Cell::new(0.0f64);
    let mut prefix = Vec::with_capacity(axes.len());
    let est = nested(f, axes, &mut prefix, tol, &worst_inner);
    Estimate {
        value: est.value,
        error: est.error + worst_inner.get() * est.value.abs(),
    }
}

fn nested<F: Fn(&[f64]) -> f64>(
    f: &F,
    axes: &[Vec<f64>],
    prefix: &mut [f64],
    tol: Tolerance,
    worst: &Cell<f64>,
) -> Estimate {
    let k = prefix.len();
    if k + 1 == axes.len() {
        let base = prefix.to_vec();
        let mut pt = base.clone();
        pt.push(0.0);
        let pt = std::cell::RefCell::new(pt);
        return integrate(
            |x| {
                let mut p = pt.borrow_mut();
                p[k] = x;
                f(&p)
            },
            &axes[k],
            tol,
        );
    }
    let inner_tol = Tolerance {
        rel: tol.rel * 0.1,
        abs: tol.abs * 0.1,
        ..tol
    };
    let base = prefix.to_vec();
    integrate(
        |x| {
            let mut p = base.clone();
            p.push(x);
            let e = nested(f, axes, &mut p, inner_tol, worst);
            if e.value != 0.0 {
                worst.set(worst.get().max(e.error / e.value.abs()));
            }
            e.value
        },
        &axes[k],
        tol,
    )
}

/// Gauss–Legendre nodes and weights on [-1, 1] (Newton on the Legendre recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p0 / dp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Cached Gauss–Legendre rule with 2^p nodes, p in 3..=9.
pub(crate) fn gauss_legendre_cached(p: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static CACHE: [OnceLock<(Vec<f64>, Vec<f64>)>; 10] = [const { OnceLock::new() }; 10];
    CACHE[p].get_or_init(|| gauss_legendre(1 << p))
}

/// Probabilists' Gauss–Hermite rule: ∑ w_i g(x_i) ≈ ∫ g φ, exact for degree ≤ 2n−1.
///
/// Nodes come from the Golub–Welsch eigenproblem and are polished by
/// Newton steps; weights use the Christoffel formula 1/∑ h_j(x)².
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || n > 200 {
        return Err(Error::Range {
            what: "Gauss–Hermite order",
            detail: format!("{n} not in 1..=200"),
        });
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = (i as f64).sqrt();
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            // orthonormal h_n and derivative h_n' = sqrt(n) h_{n-1}
            let (hn, hn1) = orthonormal_pair(n, *x);
            let d = (n as f64).sqrt() * hn1;
            if d != 0.0 {
                *x -= hn / d;
            }
        }
        let mut s = 0.0;
        let mut h0 = 0.0;
        let mut h1 = 1.0;
        for j in 0..n {
            if j > 0 {
                let h2 = (*x * h1 - ((j - 1) as f64).sqrt() * h0) / (j as f64).sqrt();
                h0 = h1;
                h1 = h2;
            }
            s += h1 * h1;
        }
        weights.push(1.0 / s);
    }
    Ok((nodes, weights))
}

/// Returns (h_n(x), h_{n-1}(x)) for the orthonormal Hermite family.
fn orthonormal_pair(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for j in 0..n {
        let next = (x * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev)
}
