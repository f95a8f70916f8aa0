//! Numeric probes of the dependence conditions: the ratio Δ_n, the
//! product-growth condition, the spatio-temporal condition and LRD
//! classification by growth of ∫|C|.

use crate::error::{Error, Result};
use crate::models::Covariance;
use crate::normalizer::sigma_stationary;
use crate::quadrature::{graded_points, integrate, integrate_box, Tolerance};
use crate::stats::loglog_fit;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Slope threshold separating decay/growth from flat sequences.
pub const SLOPE_THRESHOLD: f64 = 0.05;
/// Minimum R² for a confident verdict.
pub const MIN_R_SQUARED: f64 = 0.9;
/// Minimum number of probe points for a fit.
pub const MIN_PROBES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrdClass {
    ShortRange,
    LongRange,
    Inconclusive,
}

/// Whether the condition asks the sequence to vanish or to blow up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    Decay,
    Divergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    pub kind: ConditionKind,
    pub sizes: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub verdict: Verdict,
}

impl ConditionReport {
    fn build(condition: &str, kind: ConditionKind, sizes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let (slope, intercept, r_squared, verdict) = if sizes.len() < MIN_PROBES {
            (f64::NAN, f64::NAN, f64::NAN, Verdict::Inconclusive)
        } else {
            let fit = loglog_fit(&sizes, &values)?;
            (fit.slope, fit.intercept, fit.r_squared, classify(kind, fit.slope, fit.r_squared))
        };
        Ok(ConditionReport {
            condition: condition.to_string(),
            kind,
            sizes,
            values,
            slope,
            intercept,
            r_squared,
            verdict,
        })
    }

    /// CSV with columns n, value.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["n", "value"])?;
        for (n, v) in self.sizes.iter().zip(&self.values) {
            out.write_record([format!("{n:.16e}"), format!("{v:.16e}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Verdict rule shared by all checkers.
///
/// Decay: satisfied when the slope is below −0.05 with R² ≥ 0.9; violated
/// when the slope is at least −0.05 and either the fit is good or the
/// sequence is flat. Divergence mirrors this.
pub fn classify(kind: ConditionKind, slope: f64, r_squared: f64) -> Verdict {
    let s = match kind {
        ConditionKind::Decay => -slope,
        ConditionKind::Divergence => slope,
    };
    let good = r_squared >= MIN_R_SQUARED;
    if s > SLOPE_THRESHOLD && good {
        Verdict::Satisfied
    } else if s <= SLOPE_THRESHOLD && (good || slope.abs() < SLOPE_THRESHOLD) {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    }
}

/// Geometric grid with `per_decade` points per decade from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let steps = ((hi / lo).log10() * per_decade as f64).round() as usize;
    (0..=steps)
        .map(|i| lo * 10f64.powf(i as f64 / per_decade as f64))
        .collect()
}

/// Probe radii 10²..10⁴ with 8 points per decade.
pub fn default_probe_radii() -> Vec<f64> {
    geometric_grid(1e2, 1e4, 8)
}

fn check_sizes(sizes: &[f64]) -> Result<()> {
    if sizes.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidParameter("probe sizes must be positive".into()));
    }
    Ok(())
}

/// Δ_n = ∫C²w_n / ∫Cw_n on cubes [0, n]^d, where w_n is the window overlap.
pub fn delta_ratio<C: Covariance + ?Sized>(model: &C, sizes: &[f64]) -> Result<ConditionReport> {
    check_sizes(sizes)?;
    let d = model.dim();
    let values = sizes
        .par_iter()
        .map(|&n| {
            let ext = vec![n; d];
            let num = sigma_stationary(model, &ext, 2)?.value / 2.0;
            let den = sigma_stationary(model, &ext, 1)?.value;
            if den.abs() < 1e-12 {
                return Err(Error::Degenerate(format!("denominator {den:e} at n = {n}")));
            }
            Ok(num / den)
        })
        .collect::<Result<Vec<f64>>>()?;
    ConditionReport::build("delta_ratio", ConditionKind::Decay, sizes.to_vec(), values)
}

fn box_integral<C: Covariance + ?Sized>(model: &C, radii: &[f64], abs: bool) -> f64 {
    let axes: Vec<Vec<f64>> = radii
        .iter()
        .enumerate()
        .map(|(l, &r)| graded_points(r, 16, &model.kinks(l)))
        .collect();
    let tol = Tolerance {
        abs: 1e-300,
        rel: 1e-8,
        max_intervals: 4000,
    };
    let f = |t: &[f64]| {
        let c = model.eval_lag(t);
        if abs {
            c.abs()
        } else {
            c
        }
    };
    2f64.powi(radii.len() as i32) * integrate_box(&f, &axes, tol).value
}

/// ∏ r_i^{−1+δ} ∫_{|t_i| ≤ r_i} C(t) dt along a window sequence.
///
/// Each entry of `windows` lists the per-axis radii; the fit regresses on
/// the geometric mean radius.
pub fn check_condcor2<C: Covariance + ?Sized>(model: &C, windows: &[Vec<f64>], delta: f64) -> Result<ConditionReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    let d = model.dim();
    for w in windows {
        if w.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: w.len(),
            });
        }
        check_sizes(w)?;
    }
    let values: Vec<f64> = windows
        .par_iter()
        .map(|w| {
            let pre: f64 = w.iter().map(|r| r.powf(delta - 1.0)).product();
            pre * box_integral(model, w, false)
        })
        .collect();
    let sizes = windows
        .iter()
        .map(|w| w.iter().product::<f64>().powf(1.0 / d as f64))
        .collect();
    ConditionReport::build("condcor2", ConditionKind::Divergence, sizes, values)
}

/// r^{−δ} ∫_0^r C̃(v) dv for a one-dimensional temporal covariance.
pub fn check_spatiotemporal<C: Covariance + ?Sized>(temporal: &C, radii: &[f64], delta: f64) -> Result<ConditionReport> {
    if temporal.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: temporal.dim(),
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    check_sizes(radii)?;
    let values: Vec<f64> = radii
        .par_iter()
        .map(|&r| {
            let pts = graded_points(r, 16, &temporal.kinks(0));
            let tol = Tolerance {
                abs: 1e-300,
                rel: 1e-9,
                max_intervals: 4000,
            };
            r.powf(-delta) * integrate(|v| temporal.eval_lag(&[v]), &pts, tol).value
        })
        .collect();
    ConditionReport::build("spatiotemporal", ConditionKind::Divergence, radii.to_vec(), values)
}

/// Growth of ∫_{[−R,R]^d} |C| over the probe radii; a divergent fit means
/// long-range dependence. The cube and the ball of radius R are nested
/// within a constant factor, so either gives the same verdict.
pub fn lrd_classify<C: Covariance + ?Sized>(model: &C, radii: &[f64]) -> Result<(LrdClass, ConditionReport)> {
    check_sizes(radii)?;
    let d = model.dim();
    let values: Vec<f64> = radii.par_iter().map(|&r| box_integral(model, &vec![r; d], true)).collect();
    let report = ConditionReport::build("lrd_classify", ConditionKind::Divergence, radii.to_vec(), values)?;
    let class = match report.verdict {
        Verdict::Satisfied => LrdClass::LongRange,
        Verdict::Violated => LrdClass::ShortRange,
        Verdict::Inconclusive => LrdClass::Inconclusive,
    };
    Ok((class, report))
}
